#pragma once

#include <cstdint>
#include <string>

#include "smstore/cos.hpp"
#include "smstore/faas.hpp"
#include "smstore/keys.hpp"
#include "smstore/vtime.hpp"

namespace smstore {

// Storage-daemon knobs. Defaults are the desk-scale equivalents of the
// production values described in README.md.
struct DaemonConfig {
  VirtualDuration bucket_interval = 10 * kMinute;
  uint32_t active_intervals = 2;    // buckets younger than this stay writable-adjacent
  uint32_t degraded_intervals = 3;  // buckets at least this old are retired
  double hardcap_fraction = 0.8;    // of instance memory, storage partition cap

  size_t queue_capacity = 32;            // per function per queue
  uint64_t large_threshold = 1ull << 20;  // bytes; >= goes to the large queue
  VirtualDuration consolidation_window = 10 * kMillisecond;

  uint32_t snapshot_every = 16;  // log seals between snapshots
  uint32_t recovery_group = 20;  // g
  uint32_t recovery_k = 2;       // parallel iff diff > k*g
  uint32_t recovery_replacement_cap = 16;
  VirtualDuration shard_retention = 60 * kSecond;

  VirtualDuration warmup_active = 60 * kSecond;
  VirtualDuration warmup_degraded = 300 * kSecond;
  VirtualDuration warmup_poll = 60 * kSecond;

  VirtualDuration migration_throttle = 1 * kSecond;
  VirtualDuration migration_max = 30 * kSecond;

  uint32_t piece_parallelism = 4;
  uint64_t exec_bytes_per_sec = 75ull << 20;  // per-instance handler throughput

  bool demand_cache = true;
  bool parallel_recovery = true;
  bool elastic = true;           // false: fixed pool, no scale-out, no lifecycle
  uint32_t fixed_pool_groups = 1;

  VirtualDuration reclamation_poll = 60 * kSecond;
  VirtualDuration sample_interval = 5 * kSecond;

  void validate() const;
};

// Whole-system configuration: one object store, one platform, N daemons.
struct SystemConfig {
  uint64_t seed = 1;
  uint32_t daemons = 1;
  uint32_t ring_vnodes = 128;

  ECConfig ec;
  LargeObjectBounds bounds;
  PlatformConfig faas;
  CosRates cos_rates;
  CosLatency cos_latency;
  std::string cos_backend = "memory";  // or "filesystem"
  std::string cos_root;                // filesystem backend root
  DaemonConfig daemon;

  void validate() const;
};

// Loads JSON config (all keys optional, unknown keys rejected), then applies
// SMSTORE_* environment overrides. Empty path = defaults + env only.
// Env form: SMSTORE_<SECTION>_<KEY>=value, e.g. SMSTORE_EC_D=4,
// SMSTORE_SMS_QUEUE_CAPACITY=2; section/key names match the JSON schema.
SystemConfig load_config(const std::string& json_path);
SystemConfig config_from_json_text(const std::string& text, bool apply_env = false);

}  // namespace smstore
