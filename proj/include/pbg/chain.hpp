#pragma once

// Protocol data structures: votes, quorum and timeout certificates, blocks,
// canonical serialization and the block ranking rules.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pbg/bytes.hpp"
#include "pbg/crypto.hpp"

namespace pbg {

using View = std::uint64_t;
using BlockId = Digest;

/// Vote and QC type: a subset of {prud, eqvc}; the empty set is "normal".
class VoteType {
 public:
  static constexpr std::uint8_t kPrud = 1;
  static constexpr std::uint8_t kEqvc = 2;

  constexpr VoteType() = default;
  constexpr VoteType(bool prud, bool eqvc)
      : bits_(static_cast<std::uint8_t>((prud ? kPrud : 0) | (eqvc ? kEqvc : 0))) {}

  static constexpr VoteType normal() { return {false, false}; }
  static constexpr VoteType prud() { return {true, false}; }
  static constexpr VoteType eqvc() { return {false, true}; }
  static constexpr VoteType prud_eqvc() { return {true, true}; }
  /// Rejects bit patterns outside the four defined types.
  static std::optional<VoteType> from_bits(std::uint8_t bits);

  constexpr bool is_normal() const { return bits_ == 0; }
  constexpr bool has_prud() const { return (bits_ & kPrud) != 0; }
  constexpr bool has_eqvc() const { return (bits_ & kEqvc) != 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  std::string_view name() const;

  friend constexpr auto operator<=>(VoteType, VoteType) = default;

 private:
  std::uint8_t bits_ = 0;
};

struct Vote {
  ReplicaId voter = 0;
  View view = 0;
  BlockId block;
  VoteType vtype;
  Signature sig;
};

Bytes canonical_bytes(const Vote& v);
Vote make_vote(const KeyPair& key, View view, const BlockId& block, VoteType vtype);
bool verify_vote(const Vote& v, const KeyDirectory& keys);

/// n - f same-type votes for one block in one view. Construction enforces the
/// structural invariants; signatures are checked separately by verify().
class QuorumCert {
 public:
  QuorumCert() = default;

  /// Throws MalformedCert on duplicate voters, mixed (view, block, type) or
  /// fewer than `quorum` votes.
  static QuorumCert form(std::vector<Vote> votes, std::size_t quorum);
  /// Synthetic self-certificate of the genesis block (view 0, no votes).
  static QuorumCert genesis(const BlockId& genesis_id);
  /// Builds without structural checks. For adversaries and tests only.
  static QuorumCert unchecked(View view, const BlockId& block, VoteType type, std::vector<Vote> votes);

  View view() const noexcept { return view_; }
  const BlockId& block() const noexcept { return block_; }
  VoteType type() const noexcept { return type_; }
  std::span<const Vote> votes() const noexcept { return votes_; }
  bool is_genesis() const noexcept { return view_ == 0 && votes_.empty(); }

  /// Distinct voters, matching fields, size >= quorum and valid signatures.
  bool verify(const KeyDirectory& keys, std::size_t quorum) const;

 private:
  View view_ = 0;
  BlockId block_;
  VoteType type_;
  std::vector<Vote> votes_;
};

struct Block;
using BlockPtr = std::shared_ptr<const Block>;

struct TimeoutMsg {
  ReplicaId sender = 0;
  View view = 0;  // the view that timed out
  BlockPtr high_vote;
  std::optional<QuorumCert> high_qc;  // carried by the HotStuff baselines only
  Signature sig;
};

Bytes canonical_bytes(const TimeoutMsg& m);
TimeoutMsg make_timeout(const KeyPair& key, View view, BlockPtr high_vote,
                        std::optional<QuorumCert> high_qc = std::nullopt);
bool verify_timeout(const TimeoutMsg& m, const KeyDirectory& keys);

/// Certificate that a view timed out. Stored in aggregate form: the view, the
/// sorted sender set and a digest over the covered timeout messages. The
/// messages themselves travel in the block's tmo_set.
class TimeoutCert {
 public:
  TimeoutCert() = default;

  /// Throws MalformedCert on mixed views, duplicate senders or too few messages.
  static TimeoutCert form(std::span<const TimeoutMsg> msgs, std::size_t quorum);
  /// Builds without structural checks. For adversaries and tests only.
  static TimeoutCert unchecked(std::span<const TimeoutMsg> msgs);

  View view() const noexcept { return view_; }
  std::span<const ReplicaId> senders() const noexcept { return senders_; }
  const Digest& digest() const noexcept { return digest_; }

  /// True iff `msgs` is exactly the covered message set.
  bool covers(std::span<const TimeoutMsg> msgs) const;

 private:
  static Digest digest_of(std::span<const TimeoutMsg> msgs);

  View view_ = 0;
  std::vector<ReplicaId> senders_;
  Digest digest_;
};

enum class Origin : std::uint8_t { ByVotes = 0, ByTimeout = 1 };

struct Block {
  ReplicaId proposer = 0;
  View view = 0;
  BlockId parent;
  QuorumCert qc;
  BlockId qc_block;
  std::optional<TimeoutCert> tc;
  std::optional<std::vector<TimeoutMsg>> tmo_set;
  std::uint32_t cnt_tmo = 0;
  Bytes payload;
  Origin origin = Origin::ByVotes;
  Signature sig;
  BlockId id;

  /// In-memory link to the parent so receivers can pull missing ancestors.
  /// Not part of the block's identity.
  BlockPtr parent_link;

  bool is_genesis() const noexcept { return view == 0; }
};

/// Header fields in declaration order; sig, id and parent_link excluded.
Bytes canonical_bytes(const Block& b);
BlockId compute_block_id(const Block& b);

/// Computes the id, signs it and freezes the block.
BlockPtr seal(Block draft, const KeyPair& key);
/// The shared genesis block: view 0, ByVotes, self-certified.
BlockPtr make_genesis();

/// Ranking: higher view wins, then higher QC view.
bool rank(const Block& b1, const Block& b2) noexcept;
bool same_rank(const Block& b1, const Block& b2) noexcept;

enum class RankOrder { B1Higher, B2Higher, Tie };

/// Number of distinct senders in tmo_set whose high_vote is `block`.
std::size_t tmo_support(const BlockId& block, std::span<const TimeoutMsg> tmo_set);

/// Commit-boost ranking: plain rank first, then a block backed by at least
/// f + 1 distinct timeout senders outranks one that is not.
RankOrder rank_cb(const Block& b1, const Block& b2, std::span<const TimeoutMsg> tmo_set, std::size_t f);

}  // namespace pbg
