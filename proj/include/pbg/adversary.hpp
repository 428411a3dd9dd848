#pragma once

// Scripted Byzantine replicas. Each wraps an honest replica of the run's
// protocol and rewrites or suppresses its outputs.

#include <map>
#include <memory>

#include "pbg/replica.hpp"
#include "pbg/simnet.hpp"

namespace pbg {

/// State shared by colluding Byzantine replicas.
struct Coordinator {
  BlockPtr tip;  // head of the colluders' chain
  std::map<View, std::vector<TimeoutMsg>> timeouts;

  void add_timeout(const TimeoutMsg& m);
};

class ScriptedReplica : public Node {
 public:
  explicit ScriptedReplica(std::unique_ptr<Replica> inner);

  ReplicaId id() const override { return inner_->id(); }
  bool byzantine() const override { return true; }
  const Replica& inner() const { return *inner_; }

 protected:
  /// Proposal of this replica in `fx`, if any.
  static std::vector<Outgoing>::iterator own_proposal(Effects& fx, ReplicaId me);
  /// ByTimeout block on `parent`, using a quorum from `pool` in which no
  /// high_vote outranks `parent` and at least one equals it. Null if impossible.
  BlockPtr extend_by_timeout(View view, const BlockPtr& parent, const std::vector<TimeoutMsg>& pool) const;

  std::unique_ptr<Replica> inner_;
};

/// As leader, sends two sibling blocks to disjoint halves of the replicas;
/// votes for every valid block it sees, also twice in one view.
class Equivocator : public ScriptedReplica {
 public:
  Equivocator(std::unique_ptr<Replica> inner, std::uint64_t seed, double equivocate_prob = 0.5);
  Effects handle(const Event& ev) override;

 private:
  Rng rng_;
  double prob_;
};

/// From `trigger_view` on, its first leader turn broadcasts an invalid
/// ByVotes block conflicting with its last committed block, signs a timeout
/// message carrying that block as high_vote, and halts.
class InvalidThenHalt : public ScriptedReplica {
 public:
  InvalidThenHalt(std::unique_ptr<Replica> inner, std::shared_ptr<Coordinator> coord, View trigger_view);
  Effects handle(const Event& ev) override;
  bool attacked() const noexcept { return halted_; }

 private:
  std::shared_ptr<Coordinator> coord_;
  View trigger_;
  bool halted_ = false;
};

/// Once the coordinator has a tip, reports it as high_vote in its timeout
/// messages and, as leader, extends it by timeout when a fitting TC exists.
class Extender : public ScriptedReplica {
 public:
  Extender(std::unique_ptr<Replica> inner, std::shared_ptr<Coordinator> coord);
  Effects handle(const Event& ev) override;

 private:
  std::shared_ptr<Coordinator> coord_;
};

/// Never votes. Reports the highest-ranked block it knows as high_vote and,
/// as leader after a TC, extends it by timeout ignoring the prudence degree.
class HollowInducer : public ScriptedReplica {
 public:
  explicit HollowInducer(std::unique_ptr<Replica> inner);
  Effects handle(const Event& ev) override;

 private:
  void observe(const BlockPtr& b);

  BlockPtr best_;
};

}  // namespace pbg
