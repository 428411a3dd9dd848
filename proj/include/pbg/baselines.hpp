#pragma once

// Comparison protocols built on the shared replica skeleton: Fast-HotStuff
// (two-chain commit), chained HotStuff (three-chain commit with locking) and
// BeeGees without prudence or equivocation detection.

#include "pbg/replica.hpp"

namespace pbg {

/// Commit when the first two certified ancestors are in consecutive views;
/// returns the second one. Genesis is never returned.
std::optional<BlockId> fhs_commit_rule(const Block& b, const BlockStore& store);
/// Same with three consecutive certified views; returns the third.
std::optional<BlockId> chs_commit_rule(const Block& b, const BlockStore& store);
/// BeeGees commit rule: two consecutive certified views commit the second;
/// otherwise commit unless a timeout-generated block between the two carries
/// a tmo_set entry with its parent's view that conflicts with the second.
std::optional<BlockId> beegees_commit_rule(const Block& b, const BlockStore& store);

/// Explicit validity only, no traceback. Normal or Invalid.
ValidationResult naive_beegees_validate(const Block& b, const BlockStore& store, const ValidationContext& ctx);

class HotStuffReplica : public Replica {
 public:
  HotStuffReplica(ReplicaId id, ProtocolConfig cfg, KeyPair key, KeyDirectory keys, BlockPtr genesis = make_genesis());

  const QuorumCert& high_qc() const noexcept { return high_qc_; }
  View locked_view() const noexcept { return locked_view_; }

 protected:
  ValidationResult validate(const Block& b) override;
  bool safe_to_vote(const Block& b) override;
  std::optional<BlockId> commit_target(const Block& b) override;
  TimeoutMsg make_timeout_msg(View v) override;
  BlockPtr build_timeout_proposal(View view, std::span<const TimeoutMsg> received) override;
  void observe_block(const Block& b) override;
  void observe_qc(const QuorumCert& qc) override;

 private:
  bool three_chain() const noexcept { return cfg_.protocol == Protocol::CHS; }

  QuorumCert high_qc_;
  BlockId locked_block_;
  View locked_view_ = 0;
};

class NaiveBeeGeesReplica : public Replica {
 public:
  using Replica::Replica;

 protected:
  ValidationResult validate(const Block& b) override;
  std::optional<BlockId> commit_target(const Block& b) override;
  void record_vote(const BlockPtr& b, const ValidationResult& r) override;
  BlockPtr build_timeout_proposal(View view, std::span<const TimeoutMsg> received) override;
};

/// Honest replica for the given protocol.
std::unique_ptr<Replica> make_replica(ReplicaId id, const ProtocolConfig& cfg, const KeyPair& key,
                                      const KeyDirectory& keys);

}  // namespace pbg
