#pragma once

// Experiment runner: seeded repetitions of honest-replica runs, metrics over
// traces and CSV output.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pbg/baselines.hpp"
#include "pbg/simnet.hpp"

namespace pbg {

struct ExperimentConfig {
  Protocol protocol = Protocol::PBG;
  std::size_t n = 7;
  double stop_prob = 0.0;
  std::uint32_t pd = 3;
  std::uint64_t seed = 1;
  std::size_t reps = 1;
  View views = 200;
  SimTime gst = 0.0;
  SimTime delta = 1000.0;
  double mean_latency = 250.0;  // base draws are uniform on [0.6, 1.4] x mean
  double spike_prob = 0.1;
  double spike_ms = 500.0;
  StopMode stop_mode = StopMode::CrashSlot;
  bool record_messages = false;

  std::size_t f() const noexcept { return (n - 1) / 3; }
  /// Throws InvalidConfig with a readable message.
  void check() const;
  ProtocolConfig protocol_config() const;
  SimOptions sim_options(std::uint64_t run_seed) const;
};

struct LatencyStats {
  std::size_t count = 0;
  double mean = 0;
  double median = 0;
  double p95 = 0;
};

/// Per-block latency: first correct Commit minus the block's Propose.
std::vector<double> commit_latencies(const Trace& trace);
LatencyStats summarize_latencies(std::vector<double> samples);

struct RunMetrics {
  Protocol protocol = Protocol::PBG;
  std::size_t n = 0;
  std::size_t f = 0;
  double stop_prob = 0;
  std::uint32_t pd = 0;
  std::optional<std::uint64_t> seed;  // empty for the aggregate row
  LatencyStats latency;
  double throughput_bps = 0;      // distinct committed blocks per simulated second
  std::size_t view_changes = 0;   // views with a TC formed by a correct replica
  std::size_t committed_blocks = 0;
  double sim_seconds = 0;
  double validation_work = 0;     // block evaluations per committed block, per correct replica
};

/// Metrics of one trace. `evaluations` is the total validator work of the
/// correct replicas (0 when unknown).
RunMetrics measure(const Trace& trace, const ExperimentConfig& cfg, std::uint64_t seed, std::size_t evaluations = 0);

struct RunResult {
  RunMetrics metrics;
  Trace trace;
};

/// One seeded run with honest replicas only.
RunResult run_once(const ExperimentConfig& cfg, std::uint64_t seed);

/// `reps` runs with seeds seed, seed + 1, ...; optional per-run trace files
/// trace_<protocol>_<seed>.jsonl under `trace_dir`.
std::vector<RunMetrics> run_experiment(const ExperimentConfig& cfg, const std::string& trace_dir = {});

/// Mean of each per-run metric; seed left empty.
RunMetrics aggregate(const std::vector<RunMetrics>& runs);

inline constexpr std::string_view kCsvHeader =
    "protocol,n,f,stop_prob,pd,seed,mean_latency_ms,median_latency_ms,p95_latency_ms,throughput_bps,view_changes";

void emit_csv(std::ostream& out, const std::vector<RunMetrics>& rows);
/// Throws Io with the OS error text.
void emit_csv(const std::string& path, const std::vector<RunMetrics>& rows);

}  // namespace pbg
