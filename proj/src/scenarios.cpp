#include "pbg/scenarios.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "pbg/error.hpp"

namespace pbg {

std::vector<std::string> safety_violations(const std::vector<const Replica*>& correct) {
  std::vector<std::string> out;
  for (const Replica* r : correct) {
    const auto& seq = r->committed();
    for (std::size_t i = 1; i < seq.size(); ++i) {
      if (r->store().at(seq[i]).parent != seq[i - 1]) {
        out.push_back("replica " + std::to_string(r->id()) + " committed " + seq[i].hex(8) +
                      " which does not extend " + seq[i - 1].hex(8));
      }
    }
  }
  for (std::size_t a = 0; a < correct.size(); ++a) {
    for (std::size_t b = a + 1; b < correct.size(); ++b) {
      const auto& x = correct[a]->committed();
      const auto& y = correct[b]->committed();
      const std::size_t k = std::min(x.size(), y.size());
      for (std::size_t i = 0; i < k; ++i) {
        if (x[i] != y[i]) {
          out.push_back("replicas " + std::to_string(correct[a]->id()) + " and " + std::to_string(correct[b]->id()) +
                        " diverge at height " + std::to_string(i));
          break;
        }
      }
    }
  }
  return out;
}

std::vector<View> multi_qc_views(const Trace& trace) {
  std::map<View, std::set<BlockId>> certified;
  for (const auto& e : trace.events) {
    const bool correct = e.replica < trace.correct.size() && trace.correct[e.replica];
    if (!correct) continue;
    if (e.kind == TraceKind::QCFormed) certified[e.view].insert(e.block);
    if (e.kind == TraceKind::Propose && e.qc_view > 0) certified[e.qc_view].insert(e.qc_block);
  }
  std::vector<View> out;
  for (const auto& [v, blocks] : certified) {
    if (blocks.size() > 1) out.push_back(v);
  }
  return out;
}

std::size_t late_deliveries(const Trace& trace, SimTime gst, SimTime delta) {
  std::size_t late = 0;
  for (const auto& e : trace.events) {
    if (e.kind == TraceKind::Deliver && e.sent_at >= gst && e.time - e.sent_at > delta + 1e-9) ++late;
  }
  return late;
}

bool ScenarioReport::upheld() const {
  return std::all_of(checks.begin(), checks.end(), [](const ScenarioCheck& c) { return c.ok || !c.required; });
}

std::string ScenarioReport::summary() const {
  std::ostringstream os;
  os << "scenario " << scenario << " against " << to_string(protocol) << '\n';
  for (const auto& c : checks) {
    os << "  [" << (c.ok ? "ok" : (c.required ? "FAIL" : "no")) << "] " << c.name;
    if (!c.detail.empty()) os << ": " << c.detail;
    os << '\n';
  }
  for (const auto& [k, v] : stats) os << "  " << k << " = " << v << '\n';
  os << property << (upheld() ? " upheld" : " violated") << '\n';
  return os.str();
}

std::vector<std::string> scenario_names() {
  return {"fig2_invalid_block", "hollow_chain", "equivocation", "liveness_window"};
}

namespace {

struct Cast {
  ProtocolConfig cfg;
  std::vector<KeyPair> pairs;
  KeyDirectory keys;
  std::vector<std::unique_ptr<Node>> nodes;
  std::vector<const Replica*> correct;

  Cast(ProtocolConfig c, std::uint64_t seed) : cfg(std::move(c)), pairs(generate_keys(cfg.n, seed)), keys(pairs) {
    cfg.check();
    nodes.resize(cfg.n);
  }

  std::unique_ptr<Replica> replica(ReplicaId i) const { return make_replica(i, cfg, pairs[i], keys); }

  void fill_honest() {
    for (ReplicaId i = 0; i < cfg.n; ++i) {
      if (nodes[i]) continue;
      auto r = replica(i);
      correct.push_back(r.get());
      nodes[i] = std::move(r);
    }
  }
};

ProtocolConfig base_config(const ScenarioOptions& opts, std::size_t default_n) {
  ProtocolConfig c;
  c.n = opts.n ? opts.n : default_n;
  c.f = (c.n - 1) / 3;
  c.pd.pd = opts.pd;
  c.protocol = opts.protocol;
  return c;
}

void add_safety_checks(ScenarioReport& rep, const std::vector<const Replica*>& correct, const Trace& trace) {
  const auto violations = safety_violations(correct);
  rep.checks.push_back({"committed sequences prefix-compatible", violations.empty(), true,
                        violations.empty() ? "" : violations.front()});
  const auto views = multi_qc_views(trace);
  rep.checks.push_back({"at most one certified block per view", views.empty(), true,
                        views.empty() ? "" : "view " + std::to_string(views.front())});
  rep.stats["safety_violations"] = static_cast<double>(violations.size());
  std::size_t commits = 0;
  for (const Replica* r : correct) commits = std::max(commits, r->committed().size() - 1);
  rep.stats["committed_blocks"] = static_cast<double>(commits);
}

ScenarioReport fig2_invalid_block(const ScenarioOptions& opts) {
  Cast cast(base_config(opts, 7), opts.seed);
  auto coord = std::make_shared<Coordinator>();
  const ReplicaId halter = 5 % cast.cfg.n;
  const ReplicaId extender = 6 % cast.cfg.n;
  auto halt = std::make_unique<InvalidThenHalt>(cast.replica(halter), coord, 5);
  const InvalidThenHalt* halt_ptr = halt.get();
  cast.nodes[halter] = std::move(halt);
  if (extender != halter) cast.nodes[extender] = std::make_unique<Extender>(cast.replica(extender), coord);
  cast.fill_honest();

  SimOptions so;
  so.seed = opts.seed;
  so.latency.base_low = so.latency.base_high = 100.0;
  so.latency.spike_prob = 0.0;
  Simulator sim(cast.cfg, std::move(cast.nodes), so);
  Horizon h;
  h.max_view = 30;

  ScenarioReport rep;
  rep.scenario = "fig2_invalid_block";
  rep.protocol = opts.protocol;
  rep.property = "safety";
  rep.trace = sim.run(h);

  const BlockPtr bad = halt_ptr->attacked() ? coord->tip : nullptr;
  rep.checks.push_back({"invalid block proposed and extended", halt_ptr->attacked(), false,
                        coord->tip ? "colluders' tip at view " + std::to_string(coord->tip->view) : "attack never fired"});
  std::size_t votes_on_hidden = 0;
  std::size_t rejected = 0;
  if (coord->tip) {
    const Replica& probe = *cast.correct.front();
    for (const auto& e : rep.trace.events) {
      if (!rep.trace.correct[e.replica] || !probe.store().contains(e.block)) continue;
      const Block& b = probe.store().at(e.block);
      if (b.proposer != extender && b.proposer != halter) continue;
      if (e.kind == TraceKind::Vote) ++votes_on_hidden;
      if (e.kind == TraceKind::Drop) ++rejected;
    }
  }
  rep.stats["correct_votes_on_colluder_blocks"] = static_cast<double>(votes_on_hidden);
  rep.stats["colluder_blocks_rejected"] = static_cast<double>(rejected);
  (void)bad;
  add_safety_checks(rep, cast.correct, rep.trace);
  return rep;
}

ScenarioReport hollow_chain(const ScenarioOptions& opts) {
  Cast cast(base_config(opts, 4), opts.seed);
  const ReplicaId inducer = static_cast<ReplicaId>(cast.cfg.n - 1);
  cast.nodes[inducer] = std::make_unique<HollowInducer>(cast.replica(inducer));
  cast.fill_honest();

  SimOptions so;
  so.seed = opts.seed;
  so.latency.gst = 20.0 * cast.cfg.timeout(1) + 10.0 * cast.cfg.delta * cast.cfg.pd.pd;
  so.faults.hold_votes_until_gst = true;
  Simulator sim(cast.cfg, std::move(cast.nodes), so);
  Horizon h;
  h.max_time = so.latency.gst + 40.0 * cast.cfg.delta;
  h.max_view = 1000;

  ScenarioReport rep;
  rep.scenario = "hollow_chain";
  rep.protocol = opts.protocol;
  rep.property = "prudence bound";
  rep.trace = sim.run(h);
  const std::uint32_t pd = cast.cfg.pd.pd;

  std::uint32_t max_voted = 0;
  std::size_t over_pd_votes = 0;
  std::size_t over_pd_proposals = 0;
  bool commit_after_gst = false;
  for (const auto& e : rep.trace.events) {
    const bool correct = rep.trace.correct[e.replica];
    if (e.kind == TraceKind::Vote && correct) {
      max_voted = std::max(max_voted, e.cnt_tmo);
      if (e.cnt_tmo > pd) ++over_pd_votes;
    }
    if (e.kind == TraceKind::Propose && e.cnt_tmo > pd) ++over_pd_proposals;
    if (e.kind == TraceKind::Commit && correct && e.time >= so.latency.gst) commit_after_gst = true;
  }

  const Replica& probe = *cast.correct.front();
  std::size_t max_depth = 0;
  ChainValidator uncached(cast.cfg.validation_context(cast.keys), false);
  for (const auto& e : rep.trace.events) {
    if (e.kind != TraceKind::Propose || !probe.store().contains(e.block)) continue;
    uncached.reset_stats();
    try {
      uncached.valid_chain(probe.store().at(e.block), probe.store());
    } catch (const Error&) {
    }
    max_depth = std::max(max_depth, uncached.max_depth());
  }

  rep.checks.push_back({"no correct vote on cnt_tmo > pd", over_pd_votes == 0, true,
                        std::to_string(over_pd_votes) + " such votes"});
  rep.checks.push_back({"validation recursion depth <= pd + 1", max_depth <= pd + 1, true,
                        "max depth " + std::to_string(max_depth)});
  rep.checks.push_back({"hollow chain grew to pd", max_voted == pd, true,
                        "max voted cnt_tmo " + std::to_string(max_voted)});
  rep.checks.push_back({"commits resume after GST", commit_after_gst, false, ""});
  rep.stats["pd"] = pd;
  rep.stats["max_voted_cnt_tmo"] = max_voted;
  rep.stats["max_recursion_depth"] = static_cast<double>(max_depth);
  rep.stats["proposals_beyond_pd"] = static_cast<double>(over_pd_proposals);
  return rep;
}

ScenarioReport equivocation(const ScenarioOptions& opts) {
  Cast cast(base_config(opts, 4), opts.seed);
  for (std::size_t k = 0; k < cast.cfg.f; ++k) {
    const auto id = static_cast<ReplicaId>(cast.cfg.n - 1 - k);
    cast.nodes[id] = std::make_unique<Equivocator>(cast.replica(id), opts.seed, 1.0);
  }
  cast.fill_honest();
  SimOptions so;
  so.seed = opts.seed;
  Simulator sim(cast.cfg, std::move(cast.nodes), so);
  Horizon h;
  h.max_view = 60;

  ScenarioReport rep;
  rep.scenario = "equivocation";
  rep.protocol = opts.protocol;
  rep.property = "safety";
  rep.trace = sim.run(h);
  std::map<View, std::set<BlockId>> proposals;
  std::size_t eqvc_votes = 0;
  for (const auto& e : rep.trace.events) {
    if (e.kind == TraceKind::Propose) proposals[e.view].insert(e.block);
    if (e.kind == TraceKind::Vote && e.vtype >= 0 && (e.vtype & VoteType::kEqvc)) ++eqvc_votes;
  }
  std::size_t twin_views = 0;
  for (const auto& [v, ids] : proposals) twin_views += ids.size() > 1;
  rep.checks.push_back({"equivocating proposals sent", twin_views > 0, false,
                        std::to_string(twin_views) + " views with two proposals"});
  rep.stats["eqvc_votes"] = static_cast<double>(eqvc_votes);
  add_safety_checks(rep, cast.correct, rep.trace);
  return rep;
}

ScenarioReport liveness_window(const ScenarioOptions& opts) {
  Cast cast(base_config(opts, 7), opts.seed);
  cast.fill_honest();
  const SimTime delta = cast.cfg.delta;
  SimOptions so;
  so.seed = opts.seed;
  so.latency.delta = delta;
  so.latency.gst = 40.0 * delta;
  so.latency.pre_gst_extra = 3.0 * delta;
  so.faults.stop_prob = 0.5;
  so.faults.stop_only_before_gst = true;
  Simulator sim(cast.cfg, std::move(cast.nodes), so);
  Horizon h;
  h.max_time = so.latency.gst + 30.0 * delta;
  h.max_view = 100000;

  ScenarioReport rep;
  rep.scenario = "liveness_window";
  rep.protocol = opts.protocol;
  rep.property = "liveness bound";
  rep.trace = sim.run(h);
  const Trace& t = rep.trace;
  const SimTime gst = so.latency.gst;
  constexpr double eps = 1e-6;

  std::map<View, SimTime> first_entry;
  std::map<std::pair<ReplicaId, View>, SimTime> entry;
  std::map<View, const TraceEvent*> proposal;
  std::map<std::pair<ReplicaId, BlockId>, SimTime> commit;
  for (const auto& e : t.events) {
    if (!t.correct[e.replica]) continue;
    if (e.kind == TraceKind::ViewEnter) {
      first_entry.emplace(e.view, e.time);
      entry.emplace(std::make_pair(e.replica, e.view), e.time);
    } else if (e.kind == TraceKind::Propose) {
      proposal.emplace(e.view, &e);
    } else if (e.kind == TraceKind::Commit) {
      commit.emplace(std::make_pair(e.replica, e.block), e.time);
    }
  }

  std::size_t commit_checked = 0;
  std::size_t commit_failed = 0;
  double worst_commit_slack = -1e18;
  std::string commit_detail;
  for (const auto& [v, t_v] : first_entry) {
    if (t_v < gst) continue;
    auto p0 = proposal.find(v);
    auto p1 = proposal.find(v + 1);
    auto p3 = proposal.find(v + 3);
    auto e3 = first_entry.find(v + 3);
    if (p0 == proposal.end() || p1 == proposal.end() || p3 == proposal.end() || e3 == first_entry.end()) continue;
    if (p1->second->qc_view != v || p3->second->qc_view != v + 2) continue;
    const SimTime deadline = e3->second + delta;
    if (deadline > t.end_time) continue;
    ++commit_checked;
    for (const Replica* r : cast.correct) {
      auto c = commit.find({r->id(), p0->second->block});
      const double slack = c == commit.end() ? 1e18 : c->second - deadline;
      worst_commit_slack = std::max(worst_commit_slack, slack);
      if (slack > eps) {
        ++commit_failed;
        if (commit_detail.empty()) {
          commit_detail = "B_" + std::to_string(v) + " at replica " + std::to_string(r->id()) +
                          (c == commit.end() ? " never committed" : " committed late");
        }
      }
    }
  }

  std::size_t lag_checked = 0;
  std::size_t lag_failed = 0;
  double worst_lag = 0;
  for (const auto& [v, t_v] : first_entry) {
    if (t_v < gst || t_v + 2 * delta > t.end_time) continue;
    const ReplicaId l = cast.cfg.leader(v);
    if (!t.correct[l]) continue;
    ++lag_checked;
    auto it = entry.find({l, v});
    const double lag = it == entry.end() ? 1e18 : it->second - t_v;
    worst_lag = std::max(worst_lag, lag);
    if (lag > 2 * delta + eps) ++lag_failed;
  }

  rep.checks.push_back({"B_v committed within delta of first entry to v'+1", commit_checked > 0 && commit_failed == 0,
                        true,
                        std::to_string(commit_checked) + " view pairs checked" +
                            (commit_detail.empty() ? "" : ", first failure: " + commit_detail)});
  rep.checks.push_back({"correct leader enters its view within 2 delta", lag_checked > 0 && lag_failed == 0, true,
                        std::to_string(lag_checked) + " views checked"});
  const std::size_t late = late_deliveries(t, gst, delta);
  rep.checks.push_back({"post-GST deliveries within delta", late == 0, true, std::to_string(late) + " late"});
  rep.stats["gst_ms"] = gst;
  rep.stats["worst_commit_slack_ms"] = commit_checked ? worst_commit_slack : 0.0;
  rep.stats["worst_leader_lag_ms"] = worst_lag;
  return rep;
}

}  // namespace

ScenarioReport run_scenario(std::string_view name, const ScenarioOptions& opts) {
  if (name == "fig2_invalid_block") return fig2_invalid_block(opts);
  if (name == "hollow_chain") return hollow_chain(opts);
  if (name == "equivocation") return equivocation(opts);
  if (name == "liveness_window") return liveness_window(opts);
  throw Error(Errc::UnknownScenario, std::string(name));
}

FuzzOutcome fuzz_run(Protocol protocol, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "fuzz", static_cast<std::uint64_t>(protocol));
  ProtocolConfig cfg;
  cfg.n = rng.bernoulli(0.5) ? 4 : 7;
  cfg.f = (cfg.n - 1) / 3;
  cfg.pd.pd = 1 + static_cast<std::uint32_t>(rng.next() % 4);
  cfg.protocol = protocol;
  Cast cast(cfg, seed);

  static constexpr double kStops[] = {0.0, 0.1, 0.25, 0.5};
  SimOptions so;
  so.seed = seed;
  so.faults.stop_prob = kStops[rng.next() % 4];
  if (rng.bernoulli(0.3)) {
    so.latency.gst = 20.0 * cfg.delta;
    so.latency.pre_gst_extra = 4.0 * cfg.delta;
  }

  FuzzOutcome out;
  out.seed = seed;
  std::ostringstream setup;
  setup << "n=" << cfg.n << " pd=" << cfg.pd.pd << " stop=" << so.faults.stop_prob << " gst=" << so.latency.gst;

  auto coord = std::make_shared<Coordinator>();
  const std::size_t byz = rng.next() % (cfg.f + 1);
  std::vector<ReplicaId> ids(cfg.n);
  for (ReplicaId i = 0; i < cfg.n; ++i) ids[i] = i;
  std::shuffle(ids.begin(), ids.end(), std::mt19937_64(rng.next()));
  for (std::size_t k = 0; k < byz; ++k) {
    const ReplicaId id = ids[k];
    switch (rng.next() % 3) {
      case 0:
        cast.nodes[id] = std::make_unique<Equivocator>(cast.replica(id), seed, 0.5 + 0.5 * rng.uniform01());
        setup << " eqv@" << id;
        break;
      case 1: {
        const View trigger = 3 + rng.next() % 12;
        cast.nodes[id] = std::make_unique<InvalidThenHalt>(cast.replica(id), coord, trigger);
        setup << " halt@" << id << "/v" << trigger;
        break;
      }
      default:
        cast.nodes[id] = std::make_unique<Extender>(cast.replica(id), coord);
        setup << " ext@" << id;
        break;
    }
  }
  cast.fill_honest();
  out.setup = setup.str();

  Simulator sim(cast.cfg, std::move(cast.nodes), so);
  Horizon h;
  h.max_view = 40;
  try {
    sim.run(h);
  } catch (const Error& e) {
    if (e.code() != Errc::HorizonExceeded) throw;
    out.stalled = true;
  }
  out.safety = safety_violations(cast.correct);
  out.multi_qc = multi_qc_views(sim.trace());
  for (const Replica* r : cast.correct) out.commits += r->committed().size() - 1;
  return out;
}

}  // namespace pbg
