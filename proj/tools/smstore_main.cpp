#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "smstore/bench.hpp"
#include "smstore/cluster.hpp"
#include "smstore/replay.hpp"
#include "smstore/trace.hpp"

namespace {

using namespace smstore;

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StoreError("cannot write: " + path);
  out << content;
}

std::vector<uint32_t> parse_steps(const std::string& csv) {
  std::vector<uint32_t> steps;
  std::stringstream ss(csv);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    steps.push_back(static_cast<uint32_t>(std::stoul(part)));
  }
  if (steps.empty()) throw ConfigError("steps: expected a comma-separated list like 1,5,10");
  return steps;
}

int run(int argc, char** argv) {
  CLI::App app{"smstore: elastic serverless-memory store simulator"};
  app.require_subcommand(1);

  // ---- gen ----
  auto* gen = app.add_subcommand("gen", "generate a synthetic workload trace");
  GenSpec spec;
  std::string gen_out = "-";
  gen->add_option("--mode", spec.mode, "constant | poisson | mixed | step")
      ->capture_default_str();
  gen->add_option("--duration-ms", spec.duration_ms, "trace length")->capture_default_str();
  gen->add_option("--rate", spec.rate, "mean requests per second")->capture_default_str();
  gen->add_option("--keys", spec.keys, "distinct keys")->capture_default_str();
  gen->add_option("--min-size", spec.min_size, "min object bytes")->capture_default_str();
  gen->add_option("--max-size", spec.max_size, "max object bytes")->capture_default_str();
  gen->add_option("--put-fraction", spec.put_fraction, "re-PUT probability")
      ->capture_default_str();
  gen->add_option("--burst", spec.burst, "requests per burst (mixed mode)")
      ->capture_default_str();
  gen->add_option("--step-keys", spec.step_keys, "extra keys after half time (step mode)")
      ->capture_default_str();
  gen->add_option("--seed", spec.seed, "generator seed")->capture_default_str();
  gen->add_option("--key-prefix", spec.key_prefix, "key name prefix")->capture_default_str();
  gen->add_option("-o,--out", gen_out, "output file ('-' = stdout)")->capture_default_str();

  // ---- analyze ----
  auto* analyze_cmd = app.add_subcommand("analyze", "workload metrics for a trace");
  std::string analyze_path;
  uint64_t interval_ms = 60'000;
  bool timeline_only = false;
  analyze_cmd->add_option("trace", analyze_path, "trace CSV file")->required();
  analyze_cmd->add_option("--interval-ms", interval_ms, "WSS/throughput interval")
      ->capture_default_str();
  analyze_cmd->add_flag("--timeline-only", timeline_only, "print only the timeline CSV");

  // ---- replay ----
  auto* replay_cmd = app.add_subcommand("replay", "replay a trace against the store");
  std::string replay_path, config_path, out_dir;
  ReplayOptions ropt;
  bool no_verify = false;
  replay_cmd->add_option("trace", replay_path, "trace CSV file")->required();
  replay_cmd->add_option("-c,--config", config_path, "JSON config (default: built-ins + env)");
  replay_cmd->add_option("--speed", ropt.speed, "time compression factor")
      ->capture_default_str();
  replay_cmd->add_flag("--no-verify", no_verify, "skip GET byte verification");
  replay_cmd->add_option("--report-interval-ms", ropt.report_interval_ms,
                         "cost CSV bucket width")
      ->capture_default_str();
  replay_cmd->add_option("--out-dir", out_dir,
                         "write report.txt/cost.csv/functions.csv/latency.csv here");

  // ---- bench ----
  auto* bench = app.add_subcommand("bench", "canned scenarios");
  bench->require_subcommand(1);

  auto* brec = bench->add_subcommand("recovery", "instance-loss recovery timing");
  std::string brec_config;
  RecoveryBenchOptions rbo;
  uint64_t kill_at_ms = 5000, read_period_ms = 2000, read_for_ms = 60'000;
  uint32_t brec_group = 0;
  brec->add_option("-c,--config", brec_config, "JSON config");
  brec->add_option("--objects", rbo.objects, "objects to preload")->capture_default_str();
  brec->add_option("--object-size", rbo.object_size, "bytes per object")
      ->capture_default_str();
  brec->add_option("--kill-at-ms", kill_at_ms, "reclaim offset from first read")
      ->capture_default_str();
  brec->add_option("--read-period-ms", read_period_ms, "GET period")->capture_default_str();
  brec->add_option("--read-for-ms", read_for_ms, "read phase length")->capture_default_str();
  brec->add_option("-g,--group", brec_group, "recovery group size override");

  auto* bela = bench->add_subcommand("elasticity", "step-load throughput/latency");
  std::string bela_config, steps_csv = "1,5,10";
  ElasticityBenchOptions ebo;
  uint64_t step_ms = 20'000;
  bool fixed_pool = false;
  bela->add_option("-c,--config", bela_config, "JSON config");
  bela->add_option("--steps", steps_csv, "reader counts, e.g. 1,5,10")->capture_default_str();
  bela->add_option("--step-ms", step_ms, "per-step duration")->capture_default_str();
  bela->add_option("--objects", ebo.objects, "objects to preload")->capture_default_str();
  bela->add_option("--object-size", ebo.object_size, "bytes per object")
      ->capture_default_str();
  bela->add_flag("--fixed", fixed_pool, "disable elastic scale-out (fixed pool baseline)");

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    write_or_print(gen_out, trace_to_text(gen_synthetic(spec)));
    return 0;
  }
  if (analyze_cmd->parsed()) {
    WorkloadStats stats = analyze(parse_trace(analyze_path), interval_ms);
    if (!timeline_only) std::cout << stats.summary();
    std::cout << stats.timeline_csv();
    return 0;
  }
  if (replay_cmd->parsed()) {
    ropt.verify = !no_verify;
    Cluster cluster(load_config(config_path));
    RunReport rep = replay_trace(cluster, parse_trace(replay_path), ropt);
    if (out_dir.empty()) {
      std::cout << rep.to_text() << rep.latency_csv << rep.cost_csv;
    } else {
      write_or_print(out_dir + "/report.txt", rep.to_text());
      write_or_print(out_dir + "/cost.csv", rep.cost_csv);
      write_or_print(out_dir + "/functions.csv", rep.functions_csv);
      write_or_print(out_dir + "/latency.csv", rep.latency_csv);
    }
    return 0;
  }
  if (brec->parsed()) {
    rbo.config = load_config(brec_config);
    if (brec_group) rbo.config.daemon.recovery_group = brec_group;
    rbo.kill_at = static_cast<VirtualDuration>(kill_at_ms) * kMillisecond;
    rbo.read_period = static_cast<VirtualDuration>(read_period_ms) * kMillisecond;
    rbo.read_for = static_cast<VirtualDuration>(read_for_ms) * kMillisecond;
    std::cout << bench_recovery(rbo).to_text();
    return 0;
  }
  if (bela->parsed()) {
    ebo.config = load_config(bela_config);
    if (fixed_pool) ebo.config.daemon.elastic = false;
    ebo.steps = parse_steps(steps_csv);
    ebo.step_duration = static_cast<VirtualDuration>(step_ms) * kMillisecond;
    std::cout << bench_elasticity(ebo).to_text();
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const VerificationError& e) {
    std::cerr << "verification failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
