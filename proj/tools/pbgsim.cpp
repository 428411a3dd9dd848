// pbgsim: batch experiments and adversarial scenarios.

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "pbg/error.hpp"
#include "pbg/scenarios.hpp"

namespace {

pbg::Protocol protocol_or_throw(const std::string& name) {
  auto p = pbg::parse_protocol(name);
  if (!p) throw pbg::Error(pbg::Errc::InvalidConfig, "unknown protocol '" + name + "'");
  return *p;
}

int cmd_run(const pbg::ExperimentConfig& base, const std::string& protocol, const std::string& out_dir) {
  pbg::ExperimentConfig cfg = base;
  cfg.protocol = protocol_or_throw(protocol);
  cfg.check();
  std::string trace_dir;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    trace_dir = out_dir;
  }
  auto rows = pbg::run_experiment(cfg, trace_dir);
  rows.push_back(pbg::aggregate(rows));
  if (out_dir.empty()) {
    pbg::emit_csv(std::cout, rows);
  } else {
    const auto path = (std::filesystem::path(out_dir) / "results.csv").string();
    pbg::emit_csv(path, rows);
    std::cerr << "wrote " << path << " and " << cfg.reps << " trace file(s)\n";
  }
  return 0;
}

int cmd_scenario(const std::string& name, const std::string& protocol, pbg::ScenarioOptions opts,
                 const std::string& trace_path) {
  opts.protocol = protocol_or_throw(protocol);
  const pbg::ScenarioReport report = pbg::run_scenario(name, opts);
  std::cout << report.summary();
  if (!trace_path.empty()) report.trace.write_jsonl(trace_path);
  return report.upheld() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pBeeGees consensus simulator"};
  app.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  app.require_subcommand(1);

  pbg::ExperimentConfig exp;
  std::string run_protocol = "PBG";
  std::string out_dir;
  auto* run = app.add_subcommand("run", "seeded experiment repetitions, CSV summary and JSONL traces");
  run->add_option("--protocol", run_protocol, "PBG, PBG_CB, FHS, CHS or NaiveBeeGees")->capture_default_str();
  run->add_option("--n", exp.n, "replicas (3f + 1)")->capture_default_str();
  run->add_option("--stop-prob", exp.stop_prob, "per-view probability that a correct leader stops")
      ->capture_default_str();
  run->add_option("--pd", exp.pd, "prudence degree")->capture_default_str();
  run->add_option("--seed", exp.seed, "seed of the first repetition")->capture_default_str();
  run->add_option("--reps", exp.reps, "repetitions")->capture_default_str();
  run->add_option("--views", exp.views, "views per run")->capture_default_str();
  run->add_option("--gst", exp.gst, "global stabilization time (ms)")->capture_default_str();
  run->add_option("--delta", exp.delta, "post-GST delay bound (ms)")->capture_default_str();
  run->add_option("--mean-latency", exp.mean_latency, "mean base one-way latency (ms)")->capture_default_str();
  run->add_option("--spike-prob", exp.spike_prob, "probability of a delay spike")->capture_default_str();
  run->add_option("--spike-ms", exp.spike_ms, "spike delay (ms)")->capture_default_str();
  std::string stop_mode = "crash";
  run->add_option("--stop-mode", stop_mode, "crash: a stopped leader is down for its whole slot; skip: it only withholds its block")
      ->check(CLI::IsMember({"crash", "skip"}))
      ->capture_default_str();
  run->add_option("--out", out_dir, "output directory (CSV to stdout when absent)");

  std::string scenario_name;
  std::string scenario_protocol = "PBG";
  std::string trace_path;
  pbg::ScenarioOptions sopts;
  auto* scen = app.add_subcommand("scenario", "scripted adversarial scenario; exit status 1 if the property fails");
  scen->add_option("--name", scenario_name, "fig2_invalid_block, hollow_chain, equivocation or liveness_window")
      ->required();
  scen->add_option("--protocol", scenario_protocol, "protocol under test")->capture_default_str();
  scen->add_option("--seed", sopts.seed, "seed")->capture_default_str();
  scen->add_option("--pd", sopts.pd, "prudence degree")->capture_default_str();
  scen->add_option("--n", sopts.n, "replicas (0: scenario default)")->capture_default_str();
  scen->add_option("--trace", trace_path, "write the trace as JSONL");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      exp.stop_mode = pbg::parse_stop_mode(stop_mode);
      return cmd_run(exp, run_protocol, out_dir);
    }
    return cmd_scenario(scenario_name, scenario_protocol, sopts, trace_path);
  } catch (const pbg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
