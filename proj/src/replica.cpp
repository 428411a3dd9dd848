#include "pbg/replica.hpp"

#include <algorithm>

#include "pbg/error.hpp"

namespace pbg {

namespace {

Block timeout_block_draft(ReplicaId proposer, View view, const Block& parent, const TimeoutCert& tc,
                          std::span<const TimeoutMsg> tmo_set, Bytes payload) {
  Block d;
  d.proposer = proposer;
  d.view = view;
  d.parent = parent.id;
  d.qc = parent.qc;
  d.qc_block = parent.qc_block;
  d.tc = tc;
  d.tmo_set = std::vector<TimeoutMsg>(tmo_set.begin(), tmo_set.end());
  d.cnt_tmo = parent.cnt_tmo + 1;
  d.payload = std::move(payload);
  d.origin = Origin::ByTimeout;
  return d;
}

}  // namespace

BlockPtr propose_by_qc(const ProtocolConfig& cfg, const KeyPair& key, View view, const QuorumCert& qc,
                       const BlockStore& store, Bytes payload) {
  if (cfg.leader(view) != key.replica()) throw Error(Errc::NotLeader, "view " + std::to_string(view));
  if (qc.view() + 1 != view) throw Error(Errc::StaleCertificate, "QC of view " + std::to_string(qc.view()));
  Block d;
  d.proposer = key.replica();
  d.view = view;
  d.parent = qc.block();
  d.qc = qc;
  d.qc_block = qc.block();
  d.payload = std::move(payload);
  d.origin = Origin::ByVotes;
  d.parent_link = store.ptr(qc.block());
  return seal(std::move(d), key);
}

BlockPtr propose_by_tc(const ProtocolConfig& cfg, const KeyPair& key, View view, const TimeoutCert& tc,
                       std::span<const TimeoutMsg> tmo_set, const BlockStore& store, ChainValidator& validator,
                       Bytes payload) {
  if (cfg.leader(view) != key.replica()) throw Error(Errc::NotLeader, "view " + std::to_string(view));
  if (tc.view() + 1 != view) throw Error(Errc::StaleCertificate, "TC of view " + std::to_string(tc.view()));

  std::vector<BlockPtr> candidates;
  for (const auto& m : tmo_set) {
    if (!m.high_vote) continue;
    const bool seen = std::any_of(candidates.begin(), candidates.end(),
                                  [&](const BlockPtr& c) { return c->id == m.high_vote->id; });
    if (!seen) candidates.push_back(m.high_vote);
  }
  auto key_of = [&](const BlockPtr& x) {
    const bool strong = cfg.boost() && tmo_support(x->id, tmo_set) >= cfg.f + 1;
    return std::make_tuple(x->view, x->qc.view(), strong);
  };
  std::sort(candidates.begin(), candidates.end(), [&](const BlockPtr& x, const BlockPtr& y) {
    auto kx = key_of(x);
    auto ky = key_of(y);
    if (kx != ky) return kx > ky;
    return x->id < y->id;
  });

  for (const BlockPtr& c : candidates) {
    if (c->cnt_tmo >= cfg.pd.pd) continue;
    try {
      if (!validator.valid_chain(*c, store).valid()) continue;
    } catch (const Error&) {
      continue;
    }
    Block d = timeout_block_draft(key.replica(), view, *c, tc, tmo_set, std::move(payload));
    d.parent_link = c;
    return seal(std::move(d), key);
  }
  throw Error(Errc::NoValidParent, "no extendable high_vote for view " + std::to_string(view));
}

NonPrudQc get_nonprud_qc_block(const Block& b, const BlockStore& store) {
  const Block* cur = &b;
  while (!cur->is_genesis()) {
    if (!cur->qc.type().has_prud()) return {cur->qc_block, cur->qc.type()};
    cur = &store.at(cur->qc_block);
  }
  return {cur->id, VoteType::normal()};
}

std::optional<BlockId> commit_rule(const Block& b, const BlockStore& store) {
  const NonPrudQc first = get_nonprud_qc_block(b, store);
  const NonPrudQc second = get_nonprud_qc_block(store.at(first.block), store);
  if (!first.type.is_normal()) return std::nullopt;
  return second.block;
}

Replica::Replica(ReplicaId id, ProtocolConfig cfg, KeyPair key, KeyDirectory keys, BlockPtr genesis)
    : id_(id),
      cfg_(std::move(cfg)),
      key_(std::move(key)),
      keys_(std::move(keys)),
      store_(genesis),
      validator_(cfg_.validation_context(keys_)),
      high_vote_(genesis) {
  cfg_.check();
  qcs_.emplace(0, genesis->qc);
  committed_.push_back(genesis->id);
  committed_set_.insert(genesis->id);
}

Effects Replica::handle(const Event& ev) {
  now_ = ev.now;
  Effects fx;
  if (std::holds_alternative<Start>(ev.what)) {
    on_start(fx);
  } else if (std::holds_alternative<TimerFired>(ev.what)) {
    on_local_timeout(fx);
  } else {
    const auto& d = std::get<Delivery>(ev.what);
    try {
      if (const auto* p = std::get_if<ProposalMsg>(&d.msg)) {
        if (p->block) on_proposal(p->block, fx);
      } else if (const auto* v = std::get_if<Vote>(&d.msg)) {
        on_vote(*v, fx);
      } else {
        on_timeout_msg(std::get<TimeoutMsg>(d.msg), fx);
      }
    } catch (const Error& e) {
      fx.note({NoteKind::Drop, view_, {}, 0, std::nullopt, e.what()});
    }
  }
  return fx;
}

void Replica::on_start(Effects& fx) {
  enter_view(1, fx);
  try_propose(fx);
}

ValidationResult Replica::assess(const Block& b) {
  try {
    return validate(b);
  } catch (const Error&) {
    return {Verdict::Invalid, false};
  }
}

ValidationResult Replica::validate(const Block& b) {
  if (!explicit_valid(b, store_, validator_.context())) return {Verdict::Invalid, false};
  return validator_.valid_chain(b, store_);
}

bool Replica::safe_to_vote(const Block&) { return true; }

std::optional<BlockId> Replica::commit_target(const Block& b) { return commit_rule(b, store_); }

void Replica::record_vote(const BlockPtr& b, const ValidationResult& r) {
  BlockPtr candidate = r.prud ? store_.ptr(b->parent) : b;
  if (rank(*candidate, *high_vote_)) high_vote_ = candidate;
}

TimeoutMsg Replica::make_timeout_msg(View v) { return make_timeout(key_, v, high_vote_); }

std::optional<Vote> Replica::on_proposal(const BlockPtr& b, Effects& fx) {
  store_.insert(b);
  const ValidationResult r = assess(*b);
  if (!r.valid()) {
    ++rejected_;
    fx.note({NoteKind::Drop, b->view, b->id, b->cnt_tmo, std::nullopt, "invalid proposal"});
    return std::nullopt;
  }
  observe_block(*b);
  if (b->view > view_) enter_view(b->view, fx);

  std::optional<Vote> vote;
  if (b->view == view_ && b->view > last_voted_view_ && b->view > timed_out_view_ && safe_to_vote(*b)) {
    vote = make_vote(key_, b->view, b->id, r.vote_type());
    last_voted_view_ = b->view;
    record_vote(b, r);
    fx.note({NoteKind::Vote, b->view, b->id, b->cnt_tmo, vote->vtype, {}});
    if (cfg_.boost()) {
      fx.broadcast(*vote);
    } else {
      fx.send(cfg_.leader(b->view + 1), *vote);
    }
    enter_view(b->view + 1, fx);
  }

  if (auto target = commit_target(*b)) commit_chain(*target, fx, "rule");
  for (auto it = pending_boost_.begin(); it != pending_boost_.end();) {
    if (store_.contains(*it)) {
      commit_chain(*it, fx, "boost");
      it = pending_boost_.erase(it);
    } else {
      ++it;
    }
  }
  try_propose(fx);
  return vote;
}

std::optional<QuorumCert> Replica::on_vote(const Vote& v, Effects& fx) {
  if (!verify_vote(v, keys_)) throw Error(Errc::BadSignature, "vote from " + std::to_string(v.voter));
  auto& bucket = vote_buckets_[{v.view, v.block, v.vtype.bits()}];
  if (!bucket.emplace(v.voter, v).second) return std::nullopt;

  if (cfg_.boost() && v.vtype.is_normal()) {
    normal_voters_[v.block].insert(v.voter);
    boost_check(v.block, fx);
  }
  if (bucket.size() != cfg_.quorum() || qcs_.contains(v.view)) return std::nullopt;

  std::vector<Vote> votes;
  votes.reserve(bucket.size());
  for (const auto& [_, vote] : bucket) votes.push_back(vote);
  QuorumCert qc = QuorumCert::form(std::move(votes), cfg_.quorum());
  qcs_.emplace(v.view, qc);
  fx.note({NoteKind::QCFormed, v.view, v.block, 0, v.vtype, {}});
  observe_qc(qc);
  if (cfg_.boost() || cfg_.leader(v.view + 1) == id_) enter_view(v.view + 1, fx);
  try_propose(fx);
  return qc;
}

bool Replica::boost_check(const BlockId& b, Effects& fx) {
  auto it = normal_voters_.find(b);
  if (it == normal_voters_.end() || it->second.size() < cfg_.n || boosted_.contains(b)) return false;
  boosted_.insert(b);
  if (!store_.contains(b)) {
    pending_boost_.insert(b);
    return false;
  }
  commit_chain(b, fx, "boost");
  return true;
}

std::optional<TimeoutCert> Replica::on_timeout_msg(const TimeoutMsg& m, Effects& fx) {
  if (!verify_timeout(m, keys_)) throw Error(Errc::BadSignature, "timeout from " + std::to_string(m.sender));
  if (!m.high_vote || m.high_vote->view > m.view) {
    fx.note({NoteKind::Drop, m.view, {}, 0, std::nullopt, "malformed timeout"});
    return std::nullopt;
  }
  store_.insert(m.high_vote);
  if (m.view + 1 < view_) return std::nullopt;

  auto& bucket = timeouts_[m.view];
  const bool dup = std::any_of(bucket.begin(), bucket.end(), [&](const TimeoutMsg& x) { return x.sender == m.sender; });
  if (dup) return std::nullopt;
  bucket.push_back(m);

  if (m.view < view_) {
    try_propose(fx);  // a leader may still be collecting an extendable set
    return std::nullopt;
  }
  if (bucket.size() >= cfg_.f + 1 && timed_out_view_ < m.view) send_timeout(m.view, fx);
  if (bucket.size() < cfg_.quorum() || tcs_.contains(m.view)) return std::nullopt;

  TimeoutCert tc = TimeoutCert::form(std::span(bucket).first(cfg_.quorum()), cfg_.quorum());
  tcs_.emplace(m.view, tc);
  fx.note({NoteKind::TCFormed, m.view, {}, 0, std::nullopt, {}});
  enter_view(m.view + 1, fx);
  try_propose(fx);
  return tc;
}

std::optional<TimeoutMsg> Replica::on_local_timeout(Effects& fx) {
  if (now_ < deadline_) return std::nullopt;
  if (timed_out_view_ < view_) {
    send_timeout(view_, fx);
  } else if (last_timeout_) {
    fx.broadcast(*last_timeout_);
  }
  deadline_ = now_ + cfg_.timeout(view_);
  fx.timer = deadline_;
  return last_timeout_;
}

void Replica::send_timeout(View v, Effects& fx) {
  timed_out_view_ = std::max(timed_out_view_, v);
  TimeoutMsg msg = make_timeout_msg(v);
  fx.note({NoteKind::Timeout, v, msg.high_vote ? msg.high_vote->id : BlockId{},
           msg.high_vote ? msg.high_vote->cnt_tmo : 0u, std::nullopt, {}});
  last_timeout_ = msg;
  fx.broadcast(std::move(msg));
}

void Replica::enter_view(View v, Effects& fx) {
  if (v <= view_) return;
  view_ = v;
  deadline_ = now_ + cfg_.timeout(v);
  fx.timer = deadline_;
  fx.note({NoteKind::ViewEnter, v, {}, 0, std::nullopt, {}});
}

void Replica::commit_chain(const BlockId& target, Effects& fx, std::string_view how) {
  std::vector<const Block*> fresh;
  BlockId cur = target;
  while (!committed_set_.contains(cur)) {
    const Block& b = store_.at(cur);
    fresh.push_back(&b);
    cur = b.parent;
  }
  for (auto it = fresh.rbegin(); it != fresh.rend(); ++it) {
    committed_.push_back((*it)->id);
    committed_set_.insert((*it)->id);
    fx.note({NoteKind::Commit, (*it)->view, (*it)->id, (*it)->cnt_tmo, std::nullopt, std::string(how)});
  }
}

void Replica::try_propose(Effects& fx) {
  if (cfg_.leader(view_) != id_ || proposed_view_ >= view_) return;
  const View prev = view_ - 1;
  BlockPtr block;
  if (auto qc = qcs_.find(prev); qc != qcs_.end()) {
    if (!store_.contains(qc->second.block())) return;  // wait for the certified block
    block = propose_by_qc(cfg_, key_, view_, qc->second, store_, payload_for(view_));
  } else if (tcs_.contains(prev)) {
    block = build_timeout_proposal(view_, timeouts_[prev]);
  }
  if (!block) return;
  proposed_view_ = view_;
  fx.broadcast(ProposalMsg{block});
}

BlockPtr Replica::build_timeout_proposal(View view, std::span<const TimeoutMsg> received) {
  std::vector<TimeoutMsg> usable;
  for (const auto& m : received) {
    if (m.high_vote->cnt_tmo >= cfg_.pd.pd) continue;
    if (!assess(*m.high_vote).valid() && m.high_vote->id != store_.genesis_id()) continue;
    usable.push_back(m);
    if (usable.size() == cfg_.quorum()) break;
  }
  if (usable.size() < cfg_.quorum()) return nullptr;
  const TimeoutCert tc = TimeoutCert::form(usable, cfg_.quorum());
  try {
    return propose_by_tc(cfg_, key_, view, tc, usable, store_, validator_, payload_for(view));
  } catch (const Error& e) {
    if (e.code() == Errc::NoValidParent) return nullptr;
    throw;
  }
}

Bytes Replica::payload_for(View v) const {
  ByteWriter w;
  w.u8('P').u64(v).u32(id_);
  return w.take();
}

std::vector<TimeoutMsg> Replica::timeouts_for(View v) const {
  auto it = timeouts_.find(v);
  return it == timeouts_.end() ? std::vector<TimeoutMsg>{} : it->second;
}

std::optional<QuorumCert> Replica::qc_for_view(View v) const {
  auto it = qcs_.find(v);
  if (it == qcs_.end()) return std::nullopt;
  return it->second;
}

}  // namespace pbg
