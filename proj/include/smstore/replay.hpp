#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smstore/cluster.hpp"
#include "smstore/trace.hpp"

namespace smstore {

// Deterministic payload for (key, size): hash64 over the key bytes followed
// by the u64-LE size seeds fill_pseudorandom. GET verification regenerates
// the expected bytes instead of keeping reference copies of every payload.
uint64_t payload_seed(const ObjectKey& key, uint64_t size);
Blob make_payload(const ObjectKey& key, uint64_t size);

struct ReplayOptions {
  double speed = 1.0;                    // virtual time = trace time / speed
  bool verify = true;                    // byte-check GETs; mismatch is fatal
  uint64_t report_interval_ms = 60'000;  // cost report bucket width
  VirtualDuration settle_grace = kHour;  // drain budget after the last record
};

struct LatencySummary {
  uint64_t count = 0;
  VirtualDuration p50 = 0, p90 = 0, p95 = 0, p99 = 0, max = 0;
  double mean_us = 0.0;
};
// Sorts `samples` in place; percentiles are nearest-rank.
LatencySummary summarize_latencies(std::vector<VirtualDuration>& samples);

// Outcome of one trace replay. All rendered output is deterministic for a
// given seed/config/trace (no wall-clock anywhere).
struct RunReport {
  uint64_t puts = 0, gets = 0;
  uint64_t put_failures = 0, get_failures = 0;
  uint64_t verified_gets = 0;
  uint64_t verify_failures = 0;  // always 0 on return; mismatch throws
  LatencySummary put_latency, get_latency;
  uint64_t chunk_hits = 0, chunk_total = 0;
  std::optional<double> hit_ratio;
  Money cost_io, cost_recovery, cost_warmup, cost_cos, cost_total;
  DaemonCounters counters;  // summed across daemons

  std::string cost_csv;       // interval_start_ms,io,recovery,warmup,cos,total
  std::string functions_csv;  // time_ms,daemon,deployments,live,serving,degraded,recovering
  std::string latency_csv;    // op,count,p50_us,p90_us,p95_us,p99_us,max_us,mean_us
  std::string to_text() const;
};

// Drives the trace against the cluster on the virtual clock (open loop) and
// verifies every GET against the bytes implied by the latest preceding PUT.
// Throws VerificationError on the first byte mismatch.
RunReport replay_trace(Cluster& cluster, const std::vector<TraceRecord>& trace,
                       const ReplayOptions& opt = {});

}  // namespace smstore
