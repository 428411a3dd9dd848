#pragma once

#include <cstddef>
#include <unordered_map>

#include "pbg/block_store.hpp"

namespace pbg {

/// Maximum number of consecutive timeout-generated blocks without a QC.
struct PrudenceDegree {
  std::uint32_t pd = 3;
};

enum class Verdict { Normal, Eqvc, Invalid };

struct ValidationResult {
  Verdict verdict = Verdict::Invalid;
  bool prud = false;

  bool valid() const noexcept { return verdict != Verdict::Invalid; }
  /// The vote type a correct replica casts for this result. Meaningless for Invalid.
  VoteType vote_type() const noexcept { return VoteType(prud, verdict == Verdict::Eqvc); }

  friend bool operator==(const ValidationResult&, const ValidationResult&) = default;
};

enum class RankMode { Plain, CommitBoost };

struct ValidationContext {
  std::size_t n = 4;
  std::size_t f = 1;
  PrudenceDegree pd;
  const KeyDirectory* keys = nullptr;
  RankMode rank_mode = RankMode::Plain;

  std::size_t quorum() const noexcept { return n - f; }
  ReplicaId leader(View v) const noexcept { return static_cast<ReplicaId>(v % n); }
};

/// Self-contained validity of a block (no traceback). Throws UnknownBlock if
/// the parent or qc_block cannot be resolved.
bool explicit_valid(const Block& b, const BlockStore& store, const ValidationContext& ctx);

/// Returns Eqvc iff some candidate conflicts with qc_block.
Verdict test_equivocation(std::span<const BlockPtr> candidates, const BlockId& qc_block, const BlockStore& store);

/// Traceback validation with pre-commit equivocation detection and prudence
/// checking. Results are memoised per BlockId when enabled; the cache never
/// changes a verdict because blocks are immutable and content-addressed.
class ChainValidator {
 public:
  explicit ChainValidator(ValidationContext ctx, bool memoize = true);

  /// Throws UnknownBlock for unresolvable references and MalformedCert for
  /// certificates that do not verify.
  ValidationResult valid_chain(const Block& b, const BlockStore& store);

  const ValidationContext& context() const noexcept { return ctx_; }
  /// Non-cached block evaluations so far.
  std::size_t evaluations() const noexcept { return evaluations_; }
  /// Deepest recursion seen across all calls (1 = top level only).
  std::size_t max_depth() const noexcept { return max_depth_; }
  void reset_stats() noexcept { evaluations_ = 0; max_depth_ = 0; }

 private:
  ValidationResult eval(const Block& b, const BlockStore& store, std::size_t depth);
  ValidationResult eval_timeout_block(const Block& b, const BlockStore& store, std::size_t depth);

  ValidationContext ctx_;
  bool memoize_;
  std::unordered_map<BlockId, ValidationResult, DigestHash> cache_;
  std::size_t evaluations_ = 0;
  std::size_t max_depth_ = 0;
};

/// Uncached one-shot convenience wrapper.
ValidationResult valid_chain(const Block& b, const BlockStore& store, const ValidationContext& ctx);

namespace detail {

bool block_signature_ok(const Block& b, const KeyDirectory& keys);
/// The certificate of `b` itself (QC structure and signatures), genesis aware.
bool qc_ok(const Block& b, const BlockStore& store, const ValidationContext& ctx);
/// TC and tmo_set of a ByTimeout block: matching view, quorum of distinct
/// signed senders, set covered by the TC, high_vote.view <= msg.view.
bool timeout_evidence_ok(const Block& b, const ValidationContext& ctx);
/// Rank comparison honoring the context's rank mode; tmo_set supplies vote counts.
RankOrder compare(const Block& a, const Block& b, std::span<const TimeoutMsg> tmo_set, const ValidationContext& ctx);

}  // namespace detail

}  // namespace pbg
