#include "pbg/simnet.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "pbg/error.hpp"

namespace pbg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::optional<TraceKind> trace_kind(NoteKind k) {
  switch (k) {
    case NoteKind::Vote: return TraceKind::Vote;
    case NoteKind::Timeout: return TraceKind::Timeout;
    case NoteKind::ViewEnter: return TraceKind::ViewEnter;
    case NoteKind::QCFormed: return TraceKind::QCFormed;
    case NoteKind::TCFormed: return TraceKind::TCFormed;
    case NoteKind::Commit: return TraceKind::Commit;
    case NoteKind::Drop: return TraceKind::Drop;
  }
  return std::nullopt;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  return splitmix64(splitmix64(seed) ^ fnv1a(purpose) ^ splitmix64(index + 0x51ed2701ULL));
}

Rng Rng::stream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  return Rng(mix_seed(seed, purpose, index));
}

void LatencyModel::check() const {
  if (base_low < 0 || base_high < base_low) throw Error(Errc::InvalidConfig, "latency bounds");
  if (spike_prob < 0 || spike_prob > 1) throw Error(Errc::InvalidConfig, "spike probability");
  if (spike_delay < 0 || pre_gst_extra < 0 || !(delta > 0)) throw Error(Errc::InvalidConfig, "latency parameters");
}

SimTime sample_latency(const LatencyModel& model, SimTime send_time, Rng& rng) {
  double d = rng.uniform(model.base_low, model.base_high);
  if (rng.bernoulli(model.spike_prob)) d = model.spike_delay;
  if (send_time < model.gst && model.pre_gst_extra > 0) d += rng.uniform(0.0, model.pre_gst_extra);
  const SimTime bound = std::max(send_time, model.gst) + model.delta - send_time;
  return std::min(d, bound);
}

bool leader_stopped(const FaultPlan& plan, std::uint64_t seed, View view) {
  if (plan.forced_stops.contains(view)) return true;
  if (plan.stop_prob <= 0) return false;
  Rng rng = Rng::stream(seed, "stop", view);
  return rng.bernoulli(plan.stop_prob);
}

std::string_view to_string(StopMode m) {
  return m == StopMode::SkipProposal ? "skip" : "crash";
}

StopMode parse_stop_mode(std::string_view s) {
  if (s == "skip") return StopMode::SkipProposal;
  if (s == "crash") return StopMode::CrashSlot;
  throw Error(Errc::InvalidConfig, "unknown stop mode: " + std::string(s));
}

std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::Send: return "send";
    case TraceKind::Deliver: return "deliver";
    case TraceKind::Propose: return "propose";
    case TraceKind::Vote: return "vote";
    case TraceKind::Timeout: return "timeout";
    case TraceKind::ViewEnter: return "view_enter";
    case TraceKind::QCFormed: return "qc_formed";
    case TraceKind::TCFormed: return "tc_formed";
    case TraceKind::Commit: return "commit";
    case TraceKind::Drop: return "drop";
  }
  return "?";
}

std::string Trace::to_jsonl() const {
  std::string out;
  for (const auto& e : events) {
    nlohmann::json j;
    j["t"] = e.time;
    j["seq"] = e.seq;
    j["kind"] = to_string(e.kind);
    j["replica"] = e.replica;
    if (e.peer != kBroadcast) j["peer"] = e.peer;
    j["view"] = e.view;
    if (!e.block.is_zero()) j["block"] = e.block.hex(16);
    if (!e.msg.empty()) j["msg"] = e.msg;
    if (e.vtype >= 0) j["vtype"] = VoteType::from_bits(static_cast<std::uint8_t>(e.vtype))->name();
    if (e.cnt_tmo != 0) j["cnt_tmo"] = e.cnt_tmo;
    if (e.kind == TraceKind::Propose) {
      j["qc_view"] = e.qc_view;
      j["qc_block"] = e.qc_block.hex(16);
    }
    if (e.kind == TraceKind::Deliver) j["sent_at"] = e.sent_at;
    if (!e.detail.empty()) j["detail"] = e.detail;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void Trace::write_jsonl(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw Error(Errc::Io, "cannot open " + path);
  f << to_jsonl();
  if (!f) throw Error(Errc::Io, "write failed: " + path);
}

Simulator::Simulator(ProtocolConfig cfg, std::vector<std::unique_ptr<Node>> nodes, SimOptions opts)
    : cfg_(std::move(cfg)), nodes_(std::move(nodes)), opts_(std::move(opts)) {
  cfg_.check();
  opts_.latency.check();
  if (nodes_.size() != cfg_.n) throw Error(Errc::InvalidConfig, "node count differs from n");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i] || nodes_[i]->id() != i) throw Error(Errc::InvalidConfig, "node ids must be 0..n-1");
    latency_rng_.push_back(Rng::stream(opts_.seed, "latency", i));
  }
  timer_gen_.assign(nodes_.size(), 0);
}

void Simulator::push(Pending p) {
  queue_.push_back(std::move(p));
  std::push_heap(queue_.begin(), queue_.end(), Later{});
}

bool Simulator::stopped_at(View view, SimTime now) const {
  if (opts_.faults.stop_only_before_gst && now >= opts_.latency.gst) return false;
  return leader_stopped(opts_.faults, opts_.seed, view);
}

void Simulator::record(Trace& trace, TraceEvent ev) {
  ev.seq = trace_seq_++;
  trace.events.push_back(std::move(ev));
}

void Simulator::send(ReplicaId from, ReplicaId to, SimTime now, const std::shared_ptr<const Message>& msg,
                     Trace& trace) {
  SimTime at = now + sample_latency(opts_.latency, now, latency_rng_[from]);
  if (opts_.faults.hold_votes_until_gst && now < opts_.latency.gst && std::holds_alternative<Vote>(*msg)) {
    at = opts_.latency.gst + sample_latency(opts_.latency, opts_.latency.gst, latency_rng_[from]);
  }
  push({at, seq_++, false, to, from, 0, msg, now});
  if (opts_.record_messages) {
    TraceEvent ev;
    ev.time = now;
    ev.kind = TraceKind::Send;
    ev.replica = from;
    ev.peer = to;
    ev.msg = std::string(message_kind(*msg));
    record(trace, std::move(ev));
  }
}

void Simulator::apply(ReplicaId from, SimTime now, Effects fx, Trace& trace) {
  const bool correct = !nodes_[from]->byzantine();
  for (auto& note : fx.notes) {
    if (correct && (note.kind == NoteKind::ViewEnter || note.kind == NoteKind::Commit)) last_progress_ = now;
    if (correct && note.kind == NoteKind::ViewEnter) highest_view_ = std::max(highest_view_, note.view);
    TraceEvent ev;
    ev.time = now;
    ev.kind = *trace_kind(note.kind);
    ev.replica = from;
    ev.view = note.view;
    ev.block = note.block;
    ev.cnt_tmo = note.cnt_tmo;
    if (note.vtype) ev.vtype = note.vtype->bits();
    ev.detail = std::move(note.detail);
    record(trace, std::move(ev));
  }
  if (fx.timer) {
    ++timer_gen_[from];
    push({std::max(*fx.timer, now), seq_++, true, from, from, timer_gen_[from], nullptr, now});
  }
  for (auto& o : fx.out) {
    auto msg = std::make_shared<const Message>(std::move(o.msg));
    if (const auto* p = std::get_if<ProposalMsg>(msg.get()); p && p->block && p->block->proposer == from) {
      const Block& b = *p->block;
      if (correct && stopped_at(b.view, now)) {
        TraceEvent ev;
        ev.time = now;
        ev.kind = TraceKind::Drop;
        ev.replica = from;
        ev.view = b.view;
        ev.block = b.id;
        ev.msg = "proposal";
        ev.detail = "leader stopped";
        record(trace, std::move(ev));
        continue;
      }
      if (proposed_.insert(b.id).second) {
        TraceEvent ev;
        ev.time = now;
        ev.kind = TraceKind::Propose;
        ev.replica = from;
        ev.view = b.view;
        ev.block = b.id;
        ev.cnt_tmo = b.cnt_tmo;
        ev.qc_view = b.qc.view();
        ev.qc_block = b.qc_block;
        ev.detail = b.origin == Origin::ByVotes ? "votes" : "timeout";
        record(trace, std::move(ev));
      }
    }
    if (o.to == kBroadcast) {
      for (ReplicaId to = 0; to < nodes_.size(); ++to) send(from, to, now, msg, trace);
    } else if (o.to < nodes_.size()) {
      send(from, o.to, now, msg, trace);
    }
  }
}

Trace Simulator::run(const Horizon& horizon) {
  trace_ = Trace{};
  Trace& trace = trace_;
  trace.n = nodes_.size();
  for (const auto& node : nodes_) trace.correct.push_back(!node->byzantine());
  const SimTime guard = horizon.stall_guard > 0 ? horizon.stall_guard : 200.0 * cfg_.timeout(1);

  for (ReplicaId i = 0; i < nodes_.size(); ++i) apply(i, 0.0, nodes_[i]->handle({0.0, Start{}}), trace);

  SimTime now = 0;
  while (!queue_.empty() && highest_view_ <= horizon.max_view) {
    std::pop_heap(queue_.begin(), queue_.end(), Later{});
    Pending p = std::move(queue_.back());
    queue_.pop_back();
    if (p.time > horizon.max_time) break;
    now = p.time;
    if (now - last_progress_ > guard) {
      trace.end_time = now;
      trace.max_view = highest_view_;
      throw Error(Errc::HorizonExceeded, "no progress since t=" + std::to_string(last_progress_));
    }
    if (p.timer) {
      if (p.generation != timer_gen_[p.to]) continue;
      apply(p.to, now, nodes_[p.to]->handle({now, TimerFired{}}), trace);
      continue;
    }
    if (opts_.record_messages) {
      TraceEvent ev;
      ev.time = now;
      ev.kind = TraceKind::Deliver;
      ev.replica = p.to;
      ev.peer = p.from;
      ev.msg = std::string(message_kind(*p.msg));
      ev.sent_at = p.sent_at;
      record(trace, std::move(ev));
    }
    if (const auto* v = std::get_if<Vote>(p.msg.get()); v && opts_.faults.stop_mode == StopMode::CrashSlot &&
        !nodes_[p.to]->byzantine() && cfg_.leader(v->view + 1) == p.to && stopped_at(v->view + 1, now)) {
      continue;
    }
    apply(p.to, now, nodes_[p.to]->handle({now, Delivery{p.from, *p.msg}}), trace);
  }
  trace.end_time = now;
  trace.max_view = highest_view_;
  return trace;
}

}  // namespace pbg
