#include "pbg/baselines.hpp"

#include <algorithm>

#include "pbg/error.hpp"

namespace pbg {

namespace {

/// View of the QC a timeout message claims; unverifiable claims count as 0.
View claimed_qc_view(const TimeoutMsg& m, const KeyDirectory& keys, std::size_t quorum) {
  if (!m.high_qc || m.high_qc->is_genesis()) return 0;
  return m.high_qc->verify(keys, quorum) ? m.high_qc->view() : 0;
}

/// Certified ancestors of b, nearest first, up to `depth` of them.
std::vector<const Block*> certified_chain(const Block& b, const BlockStore& store, std::size_t depth) {
  std::vector<const Block*> out;
  const Block* cur = &b;
  while (out.size() < depth && !cur->is_genesis()) {
    cur = &store.at(cur->qc_block);
    out.push_back(cur);
  }
  return out;
}

}  // namespace

std::optional<BlockId> fhs_commit_rule(const Block& b, const BlockStore& store) {
  const auto chain = certified_chain(b, store, 2);
  if (chain.size() < 2 || chain[1]->is_genesis()) return std::nullopt;
  if (chain[0]->view != chain[1]->view + 1) return std::nullopt;
  return chain[1]->id;
}

std::optional<BlockId> chs_commit_rule(const Block& b, const BlockStore& store) {
  const auto chain = certified_chain(b, store, 3);
  if (chain.size() < 3 || chain[2]->is_genesis()) return std::nullopt;
  if (chain[0]->view != chain[1]->view + 1 || chain[1]->view != chain[2]->view + 1) return std::nullopt;
  return chain[2]->id;
}

std::optional<BlockId> beegees_commit_rule(const Block& b, const BlockStore& store) {
  const auto chain = certified_chain(b, store, 2);
  if (chain.size() < 2 || chain[1]->is_genesis()) return std::nullopt;
  const Block& first = *chain[0];
  const Block& second = *chain[1];
  if (first.view == second.view + 1) return second.id;

  const Block* cur = &first;
  while (cur->id != second.id) {
    if (cur->is_genesis() || cur->view < second.view) return std::nullopt;
    if (cur->origin == Origin::ByTimeout && cur->tmo_set) {
      const View parent_view = store.at(cur->parent).view;
      for (const auto& m : *cur->tmo_set) {
        if (m.high_vote->view == parent_view && conflicts(store, m.high_vote->id, second.id)) return std::nullopt;
      }
    }
    cur = &store.at(cur->parent);
  }
  return second.id;
}

ValidationResult naive_beegees_validate(const Block& b, const BlockStore& store, const ValidationContext& ctx) {
  return explicit_valid(b, store, ctx) ? ValidationResult{Verdict::Normal, false}
                                       : ValidationResult{Verdict::Invalid, false};
}

HotStuffReplica::HotStuffReplica(ReplicaId id, ProtocolConfig cfg, KeyPair key, KeyDirectory keys, BlockPtr genesis)
    : Replica(id, std::move(cfg), std::move(key), std::move(keys), genesis),
      high_qc_(genesis->qc),
      locked_block_(genesis->id) {}

ValidationResult HotStuffReplica::validate(const Block& b) {
  const ValidationResult invalid{Verdict::Invalid, false};
  if (b.id == store_.genesis_id()) return {Verdict::Normal, false};
  const ValidationContext& ctx = validator_.context();
  if (b.view == 0 || b.proposer != cfg_.leader(b.view) || b.view <= b.qc.view()) return invalid;
  if (!detail::block_signature_ok(b, keys_) || !detail::qc_ok(b, store_, ctx)) return invalid;
  if (b.parent != b.qc_block) return invalid;
  const Block& certified = store_.at(b.qc_block);
  if (!b.qc.is_genesis() && certified.view != b.qc.view()) return invalid;

  if (b.origin == Origin::ByVotes) {
    if (b.tc || b.tmo_set || b.view != b.qc.view() + 1) return invalid;
    return {Verdict::Normal, false};
  }
  if (!detail::timeout_evidence_ok(b, ctx) || b.tc->view() + 1 != b.view) return invalid;
  for (const auto& m : *b.tmo_set) {
    if (claimed_qc_view(m, keys_, cfg_.quorum()) > b.qc.view()) return invalid;
  }
  return {Verdict::Normal, false};
}

bool HotStuffReplica::safe_to_vote(const Block& b) {
  if (!three_chain()) return true;
  return b.qc.view() > locked_view_ || is_ancestor(store_, locked_block_, b.id);
}

std::optional<BlockId> HotStuffReplica::commit_target(const Block& b) {
  return three_chain() ? chs_commit_rule(b, store_) : fhs_commit_rule(b, store_);
}

TimeoutMsg HotStuffReplica::make_timeout_msg(View v) { return make_timeout(key_, v, high_vote_, high_qc_); }

BlockPtr HotStuffReplica::build_timeout_proposal(View view, std::span<const TimeoutMsg> received) {
  if (received.size() < cfg_.quorum()) return nullptr;
  const auto tmo_set = received.first(cfg_.quorum());
  QuorumCert best = high_qc_;
  for (const auto& m : tmo_set) {
    if (claimed_qc_view(m, keys_, cfg_.quorum()) > best.view()) best = *m.high_qc;
  }
  const BlockPtr parent = store_.find(best.block());
  if (!parent) return nullptr;

  Block d;
  d.proposer = id_;
  d.view = view;
  d.parent = parent->id;
  d.qc = best;
  d.qc_block = parent->id;
  d.tc = TimeoutCert::form(tmo_set, cfg_.quorum());
  d.tmo_set = std::vector<TimeoutMsg>(tmo_set.begin(), tmo_set.end());
  d.cnt_tmo = parent->cnt_tmo + 1;
  d.payload = payload_for(view);
  d.origin = Origin::ByTimeout;
  d.parent_link = parent;
  return seal(std::move(d), key_);
}

void HotStuffReplica::observe_block(const Block& b) {
  observe_qc(b.qc);
  if (!three_chain() || b.qc.is_genesis()) return;
  const Block& b1 = store_.at(b.qc_block);
  if (b1.qc.view() > locked_view_) {
    locked_view_ = b1.qc.view();
    locked_block_ = b1.qc_block;
  }
}

void HotStuffReplica::observe_qc(const QuorumCert& qc) {
  if (qc.view() > high_qc_.view()) high_qc_ = qc;
}

ValidationResult NaiveBeeGeesReplica::validate(const Block& b) {
  return naive_beegees_validate(b, store_, validator_.context());
}

std::optional<BlockId> NaiveBeeGeesReplica::commit_target(const Block& b) { return beegees_commit_rule(b, store_); }

void NaiveBeeGeesReplica::record_vote(const BlockPtr& b, const ValidationResult&) {
  if (rank(*b, *high_vote_)) high_vote_ = b;
}

BlockPtr NaiveBeeGeesReplica::build_timeout_proposal(View view, std::span<const TimeoutMsg> received) {
  if (received.size() < cfg_.quorum()) return nullptr;
  const auto tmo_set = received.first(cfg_.quorum());
  BlockPtr parent;
  for (const auto& m : tmo_set) {
    if (!parent || rank(*m.high_vote, *parent) || (same_rank(*m.high_vote, *parent) && m.high_vote->id < parent->id)) {
      parent = m.high_vote;
    }
  }
  Block d;
  d.proposer = id_;
  d.view = view;
  d.parent = parent->id;
  d.qc = parent->qc;
  d.qc_block = parent->qc_block;
  d.tc = TimeoutCert::form(tmo_set, cfg_.quorum());
  d.tmo_set = std::vector<TimeoutMsg>(tmo_set.begin(), tmo_set.end());
  d.cnt_tmo = parent->cnt_tmo + 1;
  d.payload = payload_for(view);
  d.origin = Origin::ByTimeout;
  d.parent_link = parent;
  return seal(std::move(d), key_);
}

std::unique_ptr<Replica> make_replica(ReplicaId id, const ProtocolConfig& cfg, const KeyPair& key,
                                      const KeyDirectory& keys) {
  switch (cfg.protocol) {
    case Protocol::PBG:
    case Protocol::PBG_CB:
      return std::make_unique<Replica>(id, cfg, key, keys);
    case Protocol::FHS:
    case Protocol::CHS:
      return std::make_unique<HotStuffReplica>(id, cfg, key, keys);
    case Protocol::NaiveBeeGees:
      return std::make_unique<NaiveBeeGeesReplica>(id, cfg, key, keys);
  }
  throw Error(Errc::InvalidConfig, "unknown protocol");
}

}  // namespace pbg
