#pragma once

#include <map>
#include <set>
#include <unordered_set>

#include "pbg/protocol.hpp"

namespace pbg {

/// Builds and signs a ByVotes block extending qc.block.
/// Throws NotLeader, StaleCertificate (qc not from view - 1) or UnknownBlock.
BlockPtr propose_by_qc(const ProtocolConfig& cfg, const KeyPair& key, View view, const QuorumCert& qc,
                       const BlockStore& store, Bytes payload);

/// Builds and signs a ByTimeout block. The parent is the highest-ranked
/// tmo_set high_vote that passes traceback validation and can still be
/// extended (cnt_tmo < pd); lower-ranked candidates are tried in order.
/// Throws NotLeader, StaleCertificate or NoValidParent.
BlockPtr propose_by_tc(const ProtocolConfig& cfg, const KeyPair& key, View view, const TimeoutCert& tc,
                       std::span<const TimeoutMsg> tmo_set, const BlockStore& store, ChainValidator& validator,
                       Bytes payload);

struct NonPrudQc {
  BlockId block;
  VoteType type;
};

/// Follows qc links through prud-typed QCs and returns the first block
/// certified by a QC without the prud flag, with that QC's type.
NonPrudQc get_nonprud_qc_block(const Block& b, const BlockStore& store);

/// Returns the block to commit when `b` is received, if any.
std::optional<BlockId> commit_rule(const Block& b, const BlockStore& store);

/// pBeeGees replica (PBG and PBG_CB). The virtual hooks let the baselines
/// reuse the pacemaker, vote collection and commit bookkeeping.
class Replica : public Node {
 public:
  Replica(ReplicaId id, ProtocolConfig cfg, KeyPair key, KeyDirectory keys, BlockPtr genesis = make_genesis());
  Replica(const Replica&) = delete;
  Replica& operator=(const Replica&) = delete;

  ReplicaId id() const override { return id_; }
  Effects handle(const Event& ev) override;

  void on_start(Effects& fx);
  std::optional<Vote> on_proposal(const BlockPtr& b, Effects& fx);
  /// Throws BadSignature.
  std::optional<QuorumCert> on_vote(const Vote& v, Effects& fx);
  /// Throws BadSignature.
  std::optional<TimeoutCert> on_timeout_msg(const TimeoutMsg& m, Effects& fx);
  /// Timer expiry. Returns the timeout message sent (fresh or re-broadcast).
  std::optional<TimeoutMsg> on_local_timeout(Effects& fx);
  /// Commit-boost: commits b once all n replicas sent vote_normal for it.
  bool boost_check(const BlockId& b, Effects& fx);

  /// Validation verdict as this replica sees it; errors map to Invalid.
  ValidationResult assess(const Block& b);

  void set_clock(SimTime now) noexcept { now_ = now; }
  View view() const noexcept { return view_; }
  View last_voted_view() const noexcept { return last_voted_view_; }
  const BlockPtr& high_vote() const noexcept { return high_vote_; }
  const BlockStore& store() const noexcept { return store_; }
  const std::vector<BlockId>& committed() const noexcept { return committed_; }
  bool is_committed(const BlockId& id) const { return committed_set_.contains(id); }
  SimTime deadline() const noexcept { return deadline_; }
  const ProtocolConfig& config() const noexcept { return cfg_; }
  const KeyPair& key() const noexcept { return key_; }
  const KeyDirectory& keys() const noexcept { return keys_; }
  const ChainValidator& validator() const noexcept { return validator_; }
  std::vector<TimeoutMsg> timeouts_for(View v) const;
  std::optional<QuorumCert> qc_for_view(View v) const;
  std::size_t rejected_proposals() const noexcept { return rejected_; }

 protected:
  virtual ValidationResult validate(const Block& b);
  virtual bool safe_to_vote(const Block& b);
  virtual std::optional<BlockId> commit_target(const Block& b);
  /// high_vote bookkeeping after voting for b.
  virtual void record_vote(const BlockPtr& b, const ValidationResult& r);
  virtual TimeoutMsg make_timeout_msg(View v);
  /// Proposal after TC_{view-1}; nullptr means "wait for more timeout messages".
  virtual BlockPtr build_timeout_proposal(View view, std::span<const TimeoutMsg> received);
  virtual void observe_block(const Block&) {}
  virtual void observe_qc(const QuorumCert&) {}

  void enter_view(View v, Effects& fx);
  void commit_chain(const BlockId& target, Effects& fx, std::string_view how);
  void send_timeout(View v, Effects& fx);
  void try_propose(Effects& fx);
  Bytes payload_for(View v) const;

  ReplicaId id_;
  ProtocolConfig cfg_;
  KeyPair key_;
  KeyDirectory keys_;
  BlockStore store_;
  ChainValidator validator_;
  SimTime now_ = 0;

  View view_ = 0;
  View last_voted_view_ = 0;
  View timed_out_view_ = 0;
  View proposed_view_ = 0;
  BlockPtr high_vote_;
  std::optional<TimeoutMsg> last_timeout_;
  SimTime deadline_ = 0;

  std::map<std::tuple<View, BlockId, std::uint8_t>, std::map<ReplicaId, Vote>> vote_buckets_;
  std::map<View, QuorumCert> qcs_;
  std::map<BlockId, std::set<ReplicaId>> normal_voters_;
  std::set<BlockId> boosted_;
  std::set<BlockId> pending_boost_;
  std::map<View, std::vector<TimeoutMsg>> timeouts_;
  std::map<View, TimeoutCert> tcs_;

  std::vector<BlockId> committed_;
  std::unordered_set<BlockId, DigestHash> committed_set_;
  std::size_t rejected_ = 0;
};

}  // namespace pbg
