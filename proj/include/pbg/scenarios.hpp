#pragma once

// Adversarial scenarios, randomized safety runs and the trace/state checks
// they rely on.

#include <map>
#include <string>
#include <vector>

#include "pbg/adversary.hpp"
#include "pbg/harness.hpp"

namespace pbg {

/// Each committed sequence must be a parent chain and every two sequences
/// must be prefix-compatible. Returns one line per violation.
std::vector<std::string> safety_violations(const std::vector<const Replica*>& correct);

/// Views in which correct replicas formed or carried QCs for two distinct blocks.
std::vector<View> multi_qc_views(const Trace& trace);

/// Deliver events of messages sent at or after GST that took longer than delta.
std::size_t late_deliveries(const Trace& trace, SimTime gst, SimTime delta);

struct ScenarioOptions {
  Protocol protocol = Protocol::PBG;
  std::uint64_t seed = 1;
  std::uint32_t pd = 3;
  std::size_t n = 0;  // 0: scenario default
};

struct ScenarioCheck {
  std::string name;
  bool ok = true;
  bool required = true;  // informational checks do not affect the outcome
  std::string detail;
};

struct ScenarioReport {
  std::string scenario;
  Protocol protocol = Protocol::PBG;
  std::string property;  // e.g. "safety"
  std::vector<ScenarioCheck> checks;
  std::map<std::string, double> stats;
  Trace trace;

  bool upheld() const;
  std::string summary() const;
};

std::vector<std::string> scenario_names();

/// Throws UnknownScenario.
ScenarioReport run_scenario(std::string_view name, const ScenarioOptions& opts);

struct FuzzOutcome {
  std::uint64_t seed = 0;
  std::string setup;
  std::vector<std::string> safety;   // violations
  std::vector<View> multi_qc;        // views with two QC'd blocks
  bool stalled = false;              // hit HorizonExceeded (liveness, not safety)
  std::size_t commits = 0;           // committed blocks at correct replica 0..n, summed

  bool ok() const { return safety.empty() && multi_qc.empty(); }
};

/// One randomized run: n in {4, 7}, random stop faults, up to f Byzantine
/// replicas drawn from the equivocator, invalid-then-halt and extender
/// scripts, and sometimes a pre-GST asynchronous period.
FuzzOutcome fuzz_run(Protocol protocol, std::uint64_t seed);

}  // namespace pbg
