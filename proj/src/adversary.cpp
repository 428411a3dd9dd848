#include "pbg/adversary.hpp"

#include <algorithm>
#include <numeric>

namespace pbg {

namespace {

Bytes tagged_payload(std::string_view tag, View v, ReplicaId id) {
  ByteWriter w;
  w.raw(ByteSpan(reinterpret_cast<const std::uint8_t*>(tag.data()), tag.size())).u64(v).u32(id);
  return w.take();
}

}  // namespace

void Coordinator::add_timeout(const TimeoutMsg& m) {
  auto& list = timeouts[m.view];
  auto it = std::find_if(list.begin(), list.end(), [&](const TimeoutMsg& x) { return x.sender == m.sender; });
  if (it == list.end()) {
    list.push_back(m);
  } else {
    *it = m;
  }
}

ScriptedReplica::ScriptedReplica(std::unique_ptr<Replica> inner) : inner_(std::move(inner)) {}

std::vector<Outgoing>::iterator ScriptedReplica::own_proposal(Effects& fx, ReplicaId me) {
  return std::find_if(fx.out.begin(), fx.out.end(), [&](const Outgoing& o) {
    const auto* p = std::get_if<ProposalMsg>(&o.msg);
    return p && p->block && p->block->proposer == me;
  });
}

BlockPtr ScriptedReplica::extend_by_timeout(View view, const BlockPtr& parent,
                                            const std::vector<TimeoutMsg>& pool) const {
  const std::size_t quorum = inner_->config().quorum();
  std::vector<TimeoutMsg> chosen;
  std::vector<ReplicaId> used;
  auto take = [&](const TimeoutMsg& m) {
    if (chosen.size() == quorum || std::find(used.begin(), used.end(), m.sender) != used.end()) return;
    chosen.push_back(m);
    used.push_back(m.sender);
  };
  for (const auto& m : pool) {
    if (m.high_vote->id == parent->id) take(m);
  }
  if (chosen.empty()) return nullptr;
  for (const auto& m : pool) {
    if (rank(*parent, *m.high_vote)) take(m);
  }
  if (chosen.size() < quorum) return nullptr;

  Block d;
  d.proposer = inner_->id();
  d.view = view;
  d.parent = parent->id;
  d.qc = parent->qc;
  d.qc_block = parent->qc_block;
  d.tc = TimeoutCert::form(chosen, quorum);
  d.tmo_set = std::move(chosen);
  d.cnt_tmo = parent->cnt_tmo + 1;
  d.payload = tagged_payload("extend", view, inner_->id());
  d.origin = Origin::ByTimeout;
  d.parent_link = parent;
  return seal(std::move(d), inner_->key());
}

Equivocator::Equivocator(std::unique_ptr<Replica> inner, std::uint64_t seed, double equivocate_prob)
    : ScriptedReplica(std::move(inner)), rng_(Rng::stream(seed, "equivocator", inner_->id())), prob_(equivocate_prob) {}

Effects Equivocator::handle(const Event& ev) {
  Effects fx = inner_->handle(ev);
  const ProtocolConfig& cfg = inner_->config();
  const ReplicaId me = inner_->id();

  if (const auto* d = std::get_if<Delivery>(&ev.what)) {
    const auto* p = std::get_if<ProposalMsg>(&d->msg);
    if (p && p->block && p->block->proposer != me && p->block->view + 1 >= inner_->view()) {
      const BlockPtr& b = p->block;
      const bool voted = std::any_of(fx.out.begin(), fx.out.end(), [&](const Outgoing& o) {
        const auto* v = std::get_if<Vote>(&o.msg);
        return v && v->block == b->id;
      });
      const ValidationResult r = inner_->assess(*b);
      if (!voted && r.valid()) {
        Vote extra = make_vote(inner_->key(), b->view, b->id, r.vote_type());
        if (cfg.boost()) {
          fx.broadcast(extra);
        } else {
          fx.send(cfg.leader(b->view + 1), extra);
        }
      }
    }
  }

  auto it = own_proposal(fx, me);
  if (it == fx.out.end() || !rng_.bernoulli(prob_)) return fx;
  const BlockPtr original = std::get<ProposalMsg>(it->msg).block;
  Block draft = *original;
  draft.payload = tagged_payload("twin", original->view, me);
  const BlockPtr twin = seal(std::move(draft), inner_->key());

  std::vector<ReplicaId> order(cfg.n);
  std::iota(order.begin(), order.end(), ReplicaId{0});
  std::shuffle(order.begin(), order.end(), std::mt19937_64(rng_.next()));
  fx.out.erase(it);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const bool first_half = order[i] == me || (i < cfg.n / 2 && order[i] != me);
    fx.send(order[i], ProposalMsg{first_half ? original : twin});
  }
  return fx;
}

InvalidThenHalt::InvalidThenHalt(std::unique_ptr<Replica> inner, std::shared_ptr<Coordinator> coord, View trigger_view)
    : ScriptedReplica(std::move(inner)), coord_(std::move(coord)), trigger_(trigger_view) {}

Effects InvalidThenHalt::handle(const Event& ev) {
  if (halted_) return {};
  Effects fx = inner_->handle(ev);
  const ReplicaId me = inner_->id();
  auto it = own_proposal(fx, me);
  if (it == fx.out.end()) return fx;
  const View w = std::get<ProposalMsg>(it->msg).block->view;
  if (w < trigger_ || inner_->committed().size() < 2) return fx;

  const BlockStore& store = inner_->store();
  const Block& last = store.at(inner_->committed().back());
  Block d;
  d.proposer = me;
  d.view = w;
  d.parent = last.qc_block;
  d.qc = last.qc;
  d.qc_block = last.qc_block;
  d.payload = tagged_payload("invalid", w, me);
  d.origin = Origin::ByVotes;
  d.parent_link = store.ptr(last.qc_block);
  const BlockPtr bad = seal(std::move(d), inner_->key());

  const TimeoutMsg tmo = make_timeout(inner_->key(), w, bad);
  coord_->tip = bad;
  coord_->add_timeout(tmo);
  halted_ = true;

  Effects out;
  out.broadcast(ProposalMsg{bad});
  out.broadcast(tmo);
  out.note({NoteKind::Drop, w, bad->id, 0, std::nullopt, "halted after invalid proposal"});
  return out;
}

Extender::Extender(std::unique_ptr<Replica> inner, std::shared_ptr<Coordinator> coord)
    : ScriptedReplica(std::move(inner)), coord_(std::move(coord)) {}

Effects Extender::handle(const Event& ev) {
  Effects fx = inner_->handle(ev);
  if (!coord_->tip) return fx;
  const ReplicaId me = inner_->id();

  for (auto& o : fx.out) {
    auto* m = std::get_if<TimeoutMsg>(&o.msg);
    if (!m || m->sender != me || m->view < coord_->tip->view) continue;
    *m = make_timeout(inner_->key(), m->view, coord_->tip, m->high_qc);
    coord_->add_timeout(*m);
  }

  auto it = own_proposal(fx, me);
  if (it == fx.out.end()) return fx;
  const View w = std::get<ProposalMsg>(it->msg).block->view;
  if (coord_->tip->view >= w) return fx;
  std::vector<TimeoutMsg> pool = coord_->timeouts[w - 1];
  for (const auto& m : inner_->timeouts_for(w - 1)) pool.push_back(m);
  if (BlockPtr b = extend_by_timeout(w, coord_->tip, pool)) {
    it->msg = ProposalMsg{b};
    coord_->tip = b;
  }
  return fx;
}

HollowInducer::HollowInducer(std::unique_ptr<Replica> inner) : ScriptedReplica(std::move(inner)) {}

void HollowInducer::observe(const BlockPtr& b) {
  if (b && (!best_ || rank(*b, *best_))) best_ = b;
}

Effects HollowInducer::handle(const Event& ev) {
  if (const auto* d = std::get_if<Delivery>(&ev.what)) {
    if (const auto* p = std::get_if<ProposalMsg>(&d->msg)) observe(p->block);
    if (const auto* m = std::get_if<TimeoutMsg>(&d->msg)) observe(m->high_vote);
  }
  Effects fx = inner_->handle(ev);
  const ReplicaId me = inner_->id();

  std::erase_if(fx.out, [&](const Outgoing& o) {
    const auto* v = std::get_if<Vote>(&o.msg);
    return v && v->voter == me;
  });
  for (auto& o : fx.out) {
    auto* m = std::get_if<TimeoutMsg>(&o.msg);
    if (!m || m->sender != me || !best_ || best_->view > m->view) continue;
    if (m->high_vote && !rank(*best_, *m->high_vote)) continue;
    *m = make_timeout(inner_->key(), m->view, best_, m->high_qc);
  }

  auto it = own_proposal(fx, me);
  if (it == fx.out.end() || !best_) return fx;
  const Block& honest = *std::get<ProposalMsg>(it->msg).block;
  if (honest.origin != Origin::ByTimeout || best_->view >= honest.view) return fx;
  if (BlockPtr b = extend_by_timeout(honest.view, best_, inner_->timeouts_for(honest.view - 1))) {
    it->msg = ProposalMsg{b};
  }
  return fx;
}

}  // namespace pbg
