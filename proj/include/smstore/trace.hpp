#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smstore/keys.hpp"

namespace smstore {

enum class TraceOp : uint8_t { put = 0, get = 1 };
const char* trace_op_name(TraceOp op);

// One request in a workload trace. Timestamps are trace-relative
// milliseconds. `size` is the PUT payload size; GET rows may carry the
// expected size or 0 when unknown.
struct TraceRecord {
  uint64_t timestamp_ms = 0;
  TraceOp op = TraceOp::put;
  std::string key;
  uint64_t size = 0;

  bool operator==(const TraceRecord&) const = default;
};

// Trace file format: CSV `timestamp_ms,op,key,size`, one record per line.
// Lines starting with '#' and blank lines are skipped. GET rows may leave
// the size field empty. Timestamps must be non-decreasing; PUTs must carry a
// size >= 1. Malformed input raises ParseError with the line number.
std::vector<TraceRecord> parse_trace_text(const std::string& text);
std::vector<TraceRecord> parse_trace(const std::string& path);
std::string trace_to_text(const std::vector<TraceRecord>& records);
void write_trace(const std::string& path, const std::vector<TraceRecord>& records);

// Workload metrics over fixed intervals. WSS counts each distinct key once
// per interval at its most recently seen size; throughput counts every
// access. GET rows without a size use the key's last known size.
struct WorkloadStats {
  uint64_t interval_ms = 0;
  uint64_t records = 0;
  uint64_t puts = 0;
  uint64_t gets = 0;
  uint64_t distinct_keys = 0;
  uint64_t total_bytes = 0;
  std::vector<uint64_t> wss_timeline;            // bytes per interval
  std::vector<double> throughput_timeline;       // bytes per second
  std::vector<uint64_t> reuse_intervals_ms;      // sorted reuse gaps
  std::map<std::string, double> cov_per_object;  // keys with >= 10 reuses

  std::string timeline_csv() const;  // interval_start_ms,wss_bytes,throughput_bps
  std::string summary() const;       // key: value lines, deterministic
};

WorkloadStats analyze(const std::vector<TraceRecord>& records, uint64_t interval_ms);

// Synthetic trace generator. Modes:
//   constant - fixed inter-arrival (1000/rate ms), keys round-robin
//   poisson  - exponential inter-arrivals, keys uniform random
//   mixed    - bursts of `burst` back-to-back requests on one key separated
//              by exponential gaps (bursty: per-object CoV > 1)
//   step     - constant arrivals; after half the duration the active key set
//              grows by step_keys (working-set step)
// The first access to each key is always a PUT; later accesses re-PUT with
// probability put_fraction, otherwise GET. Each key keeps one size drawn
// uniformly from [min_size, max_size]. Deterministic under `seed`.
struct GenSpec {
  std::string mode = "constant";
  uint64_t duration_ms = 60'000;
  double rate = 10.0;  // mean requests per second
  uint32_t keys = 16;
  uint64_t min_size = 4096;
  uint64_t max_size = 65536;
  double put_fraction = 0.2;
  uint32_t burst = 20;      // mixed mode
  uint32_t step_keys = 0;   // step mode
  uint64_t seed = 1;
  std::string key_prefix = "obj-";
};

std::vector<TraceRecord> gen_synthetic(const GenSpec& spec);

// Nearest-rank percentile of a sorted, non-empty sample.
template <typename T>
T percentile_sorted(const std::vector<T>& sorted, double p) {
  size_t n = sorted.size();
  auto rank = static_cast<size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

}  // namespace smstore
