#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smstore/cluster.hpp"
#include "smstore/replay.hpp"

namespace smstore {

// Failure-recovery scenario: preload objects, issue GETs on a fixed period,
// reclaim the most loaded instance at a set offset, and report detection,
// shard staffing and replay timings from the daemon's recovery reports.
struct RecoveryBenchOptions {
  SystemConfig config;
  uint32_t objects = 32;
  uint64_t object_size = 256 * 1024;
  VirtualDuration kill_at = 5 * kSecond;    // offset from first read
  VirtualDuration read_period = 2 * kSecond;
  VirtualDuration read_for = 60 * kSecond;  // total read phase
};

struct RecoveryBenchResult {
  uint32_t group_size = 0;  // configured g
  uint64_t victim = 0;
  uint64_t diff = 0;
  RecoveryMode mode = RecoveryMode::local_only;
  uint64_t manifest_bytes = 0;
  bool detected = false;
  VirtualDuration detect_latency = -1;  // kill -> detection
  VirtualDuration parallel_phase = -1;  // detection -> all shards ready
  VirtualDuration local_phase = -1;     // detection -> local replay done
  uint32_t helpers_deployed = 0;
  uint32_t replacements = 0;
  uint64_t rerouted_reads = 0;
  uint64_t blocked_reads = 0;
  uint64_t gets = 0;
  uint64_t failed_gets = 0;

  std::string to_text() const;
};

RecoveryBenchResult bench_recovery(const RecoveryBenchOptions& opt);

// Step-load benchmark: closed-loop readers over a preloaded object set; the
// reader count steps up on a fixed period; throughput and latency are
// measured per step from completions inside the step's window.
struct ElasticityBenchOptions {
  SystemConfig config;
  std::vector<uint32_t> steps = {1, 5, 10};
  VirtualDuration step_duration = 20 * kSecond;
  uint32_t objects = 48;
  uint64_t object_size = 128 * 1024;
};

struct ElasticityStepResult {
  uint32_t readers = 0;
  uint64_t completed = 0;
  double throughput_rps = 0.0;
  VirtualDuration p50 = 0, p90 = 0;
};

struct ElasticityBenchResult {
  std::vector<ElasticityStepResult> steps;
  uint64_t failed_gets = 0;
  uint64_t scale_outs = 0;
  uint64_t demand_cache_loads = 0;

  std::string csv() const;  // readers,completed,throughput_rps,p50_us,p90_us
  std::string to_text() const;
};

ElasticityBenchResult bench_elasticity(const ElasticityBenchOptions& opt);

}  // namespace smstore
