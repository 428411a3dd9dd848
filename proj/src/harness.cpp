#include "pbg/harness.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "pbg/error.hpp"

namespace pbg {

void ExperimentConfig::check() const {
  if (n < 4 || (n - 1) % 3 != 0) throw Error(Errc::InvalidConfig, "n must be 3f + 1 with f >= 1, got " + std::to_string(n));
  if (reps < 1) throw Error(Errc::InvalidConfig, "reps must be at least 1");
  if (stop_prob < 0 || stop_prob > 1) throw Error(Errc::InvalidConfig, "stop probability must lie in [0, 1]");
  if (pd < 1) throw Error(Errc::InvalidConfig, "pd must be at least 1");
  if (views < 1) throw Error(Errc::InvalidConfig, "views must be at least 1");
  if (!(delta > 0)) throw Error(Errc::InvalidConfig, "delta must be positive");
  if (gst < 0) throw Error(Errc::InvalidConfig, "gst must be non-negative");
  if (mean_latency < 0) throw Error(Errc::InvalidConfig, "mean latency must be non-negative");
  if (spike_prob < 0 || spike_prob > 1) throw Error(Errc::InvalidConfig, "spike probability must lie in [0, 1]");
  if (spike_ms < 0) throw Error(Errc::InvalidConfig, "spike delay must be non-negative");
}

ProtocolConfig ExperimentConfig::protocol_config() const {
  ProtocolConfig c;
  c.n = n;
  c.f = f();
  c.pd.pd = pd;
  c.delta = delta;
  c.protocol = protocol;
  return c;
}

SimOptions ExperimentConfig::sim_options(std::uint64_t run_seed) const {
  SimOptions o;
  o.latency.base_low = 0.6 * mean_latency;
  o.latency.base_high = 1.4 * mean_latency;
  o.latency.spike_prob = spike_prob;
  o.latency.spike_delay = spike_ms;
  o.latency.delta = delta;
  o.latency.gst = gst;
  o.faults.stop_prob = stop_prob;
  o.faults.stop_mode = stop_mode;
  o.seed = run_seed;
  o.record_messages = record_messages;
  return o;
}

std::vector<double> commit_latencies(const Trace& trace) {
  std::map<BlockId, SimTime> proposed;
  std::map<BlockId, SimTime> first_commit;
  for (const auto& e : trace.events) {
    if (e.kind == TraceKind::Propose) {
      proposed.emplace(e.block, e.time);
    } else if (e.kind == TraceKind::Commit && e.replica < trace.correct.size() && trace.correct[e.replica]) {
      first_commit.emplace(e.block, e.time);
    }
  }
  std::vector<double> out;
  for (const auto& [id, t] : first_commit) {
    if (auto it = proposed.find(id); it != proposed.end()) out.push_back(t - it->second);
  }
  return out;
}

LatencyStats summarize_latencies(std::vector<double> samples) {
  LatencyStats s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  const std::size_t m = samples.size() / 2;
  s.median = samples.size() % 2 ? samples[m] : 0.5 * (samples[m - 1] + samples[m]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size())));
  s.p95 = samples[std::max<std::size_t>(rank, 1) - 1];
  return s;
}

RunMetrics measure(const Trace& trace, const ExperimentConfig& cfg, std::uint64_t seed, std::size_t evaluations) {
  RunMetrics m;
  m.protocol = cfg.protocol;
  m.n = cfg.n;
  m.f = cfg.f();
  m.stop_prob = cfg.stop_prob;
  m.pd = cfg.pd;
  m.seed = seed;
  m.latency = summarize_latencies(commit_latencies(trace));

  std::set<BlockId> committed;
  std::set<View> tc_views;
  for (const auto& e : trace.events) {
    const bool correct = e.replica < trace.correct.size() && trace.correct[e.replica];
    if (!correct) continue;
    if (e.kind == TraceKind::Commit) committed.insert(e.block);
    if (e.kind == TraceKind::TCFormed) tc_views.insert(e.view);
  }
  m.committed_blocks = committed.size();
  m.view_changes = tc_views.size();
  m.sim_seconds = trace.end_time / 1000.0;
  m.throughput_bps = m.sim_seconds > 0 ? static_cast<double>(committed.size()) / m.sim_seconds : 0.0;
  const auto correct_count = static_cast<double>(std::count(trace.correct.begin(), trace.correct.end(), true));
  if (!committed.empty() && correct_count > 0) {
    m.validation_work = static_cast<double>(evaluations) / correct_count / static_cast<double>(committed.size());
  }
  return m;
}

RunResult run_once(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.check();
  const ProtocolConfig pc = cfg.protocol_config();
  const auto pairs = generate_keys(pc.n, seed);
  const KeyDirectory keys(pairs);
  std::vector<std::unique_ptr<Node>> nodes;
  std::vector<const Replica*> replicas;
  for (ReplicaId i = 0; i < pc.n; ++i) {
    auto r = make_replica(i, pc, pairs[i], keys);
    replicas.push_back(r.get());
    nodes.push_back(std::move(r));
  }
  Simulator sim(pc, std::move(nodes), cfg.sim_options(seed));
  Horizon h;
  h.max_view = cfg.views;
  RunResult out;
  out.trace = sim.run(h);
  std::size_t evaluations = 0;
  for (const Replica* r : replicas) evaluations += r->validator().evaluations();
  out.metrics = measure(out.trace, cfg, seed, evaluations);
  return out;
}

std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg, const std::string& trace_dir) {
  cfg.check();
  std::vector<RunMetrics> rows;
  for (std::size_t i = 0; i < cfg.reps; ++i) {
    const std::uint64_t seed = cfg.seed + i;
    RunResult r = run_once(cfg, seed);
    if (!trace_dir.empty()) {
      const auto path = std::filesystem::path(trace_dir) /
                        ("trace_" + std::string(to_string(cfg.protocol)) + "_" + std::to_string(seed) + ".jsonl");
      r.trace.write_jsonl(path.string());
    }
    rows.push_back(r.metrics);
  }
  return rows;
}

RunMetrics aggregate(const std::vector<RunMetrics>& runs) {
  RunMetrics a;
  if (runs.empty()) return a;
  a = runs.front();
  a.seed.reset();
  const auto k = static_cast<double>(runs.size());
  auto mean_of = [&](auto field) {
    double s = 0;
    for (const auto& r : runs) s += static_cast<double>(field(r));
    return s / k;
  };
  a.latency.count = static_cast<std::size_t>(std::llround(mean_of([](const RunMetrics& r) { return r.latency.count; })));
  a.latency.mean = mean_of([](const RunMetrics& r) { return r.latency.mean; });
  a.latency.median = mean_of([](const RunMetrics& r) { return r.latency.median; });
  a.latency.p95 = mean_of([](const RunMetrics& r) { return r.latency.p95; });
  a.throughput_bps = mean_of([](const RunMetrics& r) { return r.throughput_bps; });
  a.view_changes = static_cast<std::size_t>(std::llround(mean_of([](const RunMetrics& r) { return r.view_changes; })));
  a.committed_blocks = static_cast<std::size_t>(std::llround(mean_of([](const RunMetrics& r) { return r.committed_blocks; })));
  a.sim_seconds = mean_of([](const RunMetrics& r) { return r.sim_seconds; });
  a.validation_work = mean_of([](const RunMetrics& r) { return r.validation_work; });
  return a;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

void emit_csv(std::ostream& out, const std::vector<RunMetrics>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.protocol) << ',' << r.n << ',' << r.f << ',' << fmt(r.stop_prob) << ',' << r.pd << ','
        << (r.seed ? std::to_string(*r.seed) : std::string("agg")) << ',' << fmt(r.latency.mean) << ','
        << fmt(r.latency.median) << ',' << fmt(r.latency.p95) << ',' << fmt(r.throughput_bps) << ','
        << r.view_changes << '\n';
  }
}

void emit_csv(const std::string& path, const std::vector<RunMetrics>& rows) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::Io, path + ": " + std::strerror(errno));
  emit_csv(f, rows);
  f.flush();
  if (!f) throw Error(Errc::Io, path + ": " + std::strerror(errno));
}

}  // namespace pbg
