#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "smstore/config.hpp"
#include "smstore/cos.hpp"
#include "smstore/engine.hpp"
#include "smstore/faas.hpp"
#include "smstore/function_memory.hpp"
#include "smstore/insertion_log.hpp"
#include "smstore/keys.hpp"
#include "smstore/metering.hpp"
#include "smstore/rng.hpp"

namespace smstore {

struct PutAck {
  ObjectKey key;
  bool ok = false;
  std::string error;
  VirtualTime submitted_at = 0;
  VirtualTime completed_at = 0;
  uint32_t pieces = 0;
  uint32_t chunks = 0;
};

struct GetResult {
  ObjectKey key;
  bool ok = false;
  std::string error;
  Blob payload;
  VirtualTime submitted_at = 0;
  VirtualTime completed_at = 0;
};

using PutCallback = std::function<void(PutAck)>;
using GetCallback = std::function<void(GetResult)>;

// Observable daemon events, kept for reports and invariants.
enum class BucketState { current, active, degraded, retired };
const char* bucket_state_name(BucketState s);

struct PlacementEvent {
  VirtualTime at;
  ChunkRef ref;
  uint64_t size;
  uint64_t fn;
  uint32_t group;
  int64_t bucket;
  uint32_t rejections;  // TestAndPlace rejections before this slot accepted
  bool scaled_out;      // placement launched a new group
};

struct RotationEvent {
  VirtualTime at;
  int64_t bucket;
  BucketState state;
};

struct QueueEvent {
  enum Kind : uint8_t { enqueue, start, complete };
  VirtualTime at;
  uint64_t fn;
  bool large;
  Kind kind;
  uint8_t task;  // TaskKind
  uint64_t bytes;
  uint32_t occupancy_after;
};

struct RecoveryReport {
  uint64_t fn = 0;
  uint64_t epoch = 0;
  VirtualTime detected_at = 0;
  uint64_t diff = 0;
  RecoveryMode mode = RecoveryMode::local_only;
  uint32_t group_size = 0;
  size_t manifest_ops = 0;
  uint64_t manifest_bytes = 0;
  VirtualTime parallel_done_at = -1;  // all helper shards ready
  VirtualTime local_done_at = -1;     // full local replay finished
  uint32_t helpers_deployed = 0;      // fresh deployments for helper duty
  uint32_t replacements = 0;
  bool parallel_aborted = false;
  bool restarted = false;  // superseded by a newer recovery epoch
  uint64_t rerouted_reads = 0;
  uint64_t blocked_reads = 0;
};

struct FnSample {
  VirtualTime at;
  uint32_t deployments;
  uint32_t live_instances;
  uint32_t serving;    // current+active bucket functions
  uint32_t degraded;
  uint32_t recovering;
};

struct DaemonCounters {
  uint64_t puts = 0, gets = 0;
  uint64_t chunk_reads = 0;
  uint64_t scale_outs = 0;
  uint64_t lazy_migrations = 0;     // chunks moved by throttled migration
  uint64_t ondemand_migrations = 0; // chunks moved because the owner retired
  uint64_t demand_cache_loads = 0;
  uint64_t warmup_pings = 0;
  uint64_t failures_detected = 0;
  uint64_t retired_functions = 0;
};

// The client-facing storage daemon: owns placement, bucket lifecycle,
// per-function request queues, durability tracking and recovery
// orchestration for its shard of the keyspace. All entry points run on the
// shared event engine; callbacks fire when the simulated operation
// completes.
class Daemon {
 public:
  Daemon(std::string name, const SystemConfig& cfg, Engine* engine, Platform* platform,
         CosStore* cos, CostLedger* ledger, Rng rng);

  // Bootstraps bucket 0 (or the fixed pool) and periodic maintenance.
  void start();

  void submit_put(const ObjectKey& key, Blob payload, PutCallback cb);
  void submit_get(const ObjectKey& key, GetCallback cb);

  // Lifecycle checks run lazily on entry plus on an interval timer; tests
  // call this directly to drive rotation without traffic.
  void maybe_rotate(VirtualTime now);

  const std::string& name() const { return name_; }
  const DaemonCounters& counters() const { return counters_; }
  const HitStats& hit_stats() const { return hits_; }
  const std::vector<PlacementEvent>& placement_log() const { return placements_; }
  const std::vector<RotationEvent>& rotation_log() const { return rotations_; }
  // (placement_log size at seal time, group index); lets audits order seals
  // against placements without a shared clock tick.
  const std::vector<std::pair<size_t, uint32_t>>& seal_log() const { return seals_; }
  const std::vector<QueueEvent>& queue_log() const { return queue_log_; }
  const std::vector<RecoveryReport>& recovery_reports() const { return recovery_reports_; }
  const std::vector<FnSample>& samples() const { return samples_; }

  // Introspection for invariants and reports.
  struct FnInfo {
    uint64_t id;
    int64_t bucket;       // -1 for standalone recovery helpers
    uint32_t group;
    uint32_t slot;
    bool removed;
    bool recovering;
    uint64_t admitted_bytes;  // storage bytes placed by the daemon
    LogHead head;
  };
  std::vector<FnInfo> function_table() const;
  struct MappingRow {
    ChunkRef ref;
    uint64_t storage_owner;
    std::vector<uint64_t> cache_owners;
    uint64_t size;
  };
  std::vector<MappingRow> mapping_table() const;  // full copy, scan-friendly
  std::map<int64_t, BucketState> bucket_table() const;
  size_t open_group_count() const { return open_groups_.size(); }
  uint64_t hardcap_bytes() const { return hardcap_; }
  bool has_object(const ObjectKey& key) const { return objects_.count(key) != 0; }
  uint64_t mapping_size() const { return mapping_.size(); }
  void sample_now();  // record an FnSample at the current time

 private:
  // ---- task and queue machinery ----
  enum class TaskKind : uint8_t { store = 0, read = 1, warmup = 2 };

  struct StoreItemCtx {
    StoreChunkItem item;
    // invoked at completion with the op result and the stored payload
    std::function<void(const FnOpResult&, const Blob&)> done;
  };
  struct Task {
    TaskKind kind;
    VirtualTime created;
    std::vector<StoreItemCtx> stores;                     // store
    ChunkRef read_ref;                                    // read
    std::function<void(FunctionMemory::ReadOutcome)> read_done;
    uint64_t bytes = 0;
  };
  struct Channel {
    std::deque<std::unique_ptr<Task>> waiting;
    bool in_flight = false;

    size_t occupancy() const { return waiting.size() + (in_flight ? 1 : 0); }
  };

  struct FunctionGroup {
    uint32_t index;
    int64_t bucket;
    std::vector<uint64_t> members;  // O deployments, slot i = residue i
    bool sealed = false;
  };

  struct IBucket {
    int64_t index;
    BucketState state = BucketState::current;
    std::vector<uint32_t> groups;  // group indexes homed here
  };

  struct FnState {
    uint64_t id = 0;
    uint32_t group = 0;
    uint32_t slot = 0;
    bool helper = false;   // standalone recovery helper, not a placement target
    bool removed = false;  // bucket retired or dropped after degraded failure
    bool recovering = false;
    uint64_t recovery_epoch = 0;
    uint64_t admitted_bytes = 0;  // storage partition bytes admitted by placement
    LogHead head;                 // daemon's view of the insertion log head
    VirtualTime last_activity = 0;
    bool warmup_pending = false;
    std::vector<uint64_t> preassigned_helpers;
    Channel small_q, large_q;
  };

  struct MappingEntry {
    uint64_t storage_owner = 0;
    std::vector<uint64_t> cache_owners;
    uint64_t size = 0;
  };

  struct ObjectMeta {
    uint64_t size = 0;
    uint32_t pieces = 0;
  };

  // One logical chunk read (may span probe + reroute/migration attempts).
  struct ReadCtx {
    ChunkRef ref;
    uint64_t size = 0;
    bool waited = false;  // any deferred fetch/restore => miss
    std::function<void(Blob, bool ok, const std::string& error)> done;
  };
  using ReadCtxPtr = std::shared_ptr<ReadCtx>;

  struct RecoveryState {
    uint64_t epoch = 0;
    uint64_t fn = 0;
    uint64_t generation = 0;  // instance generation the replay targets
    VirtualTime detected_at = 0;
    Manifest manifest;
    RecoveryMode mode = RecoveryMode::local_only;
    struct Helper {
      uint64_t id = 0;
      uint64_t generation = 0;  // engaged generation, for loss detection
      bool ready = false;
      std::vector<ManifestOp> ops;
      uint64_t bytes = 0;
      VirtualDuration fetch_dur = 0;
    };
    std::vector<Helper> helpers;  // index == shard
    size_t helpers_pending = 0;
    uint32_t replacements = 0;
    bool parallel_active = false;
    bool local_done = false;
    // Chunks (re)written after detection live in instance memory already;
    // reads for them are served by the recovering function directly.
    std::set<ChunkRef> fresh_refs;
    std::vector<std::pair<ChunkRef, ReadCtxPtr>> waiters;  // block until local done
    std::vector<std::vector<std::pair<ChunkRef, ReadCtxPtr>>> shard_waiters;
    size_t report_index = 0;
  };

  // ---- internals ----
  FnState& fn(uint64_t id);
  const FnState& fn(uint64_t id) const;
  int64_t bucket_of_group(uint32_t group) const;
  BucketState bucket_state(int64_t bucket) const;
  bool fn_serving(const FnState& f) const;  // live placement/read target

  void bootstrap_fixed_pool();
  uint32_t launch_group(VirtualTime now, bool count_as_scale_out);
  void seal_group(uint32_t group);
  void rebuild_open_slots();
  void retire_bucket(IBucket& bucket, VirtualTime now);
  void remove_function(uint64_t id, VirtualTime now);

  // Fig-style placement walk; returns the accepting function.
  uint64_t place_chunk(uint32_t chunk_id, uint64_t size, VirtualTime now,
                       uint32_t* rejections_out, bool* scaled_out);

  Channel& channel_for(FnState& f, uint64_t bytes);
  bool queue_full(const FnState& f, uint64_t bytes) const;
  void enqueue_store(uint64_t fn_id, StoreItemCtx ctx, VirtualTime now);
  void enqueue_read(uint64_t fn_id, const ChunkRef& ref, uint64_t bytes,
                    std::function<void(FunctionMemory::ReadOutcome)> done, VirtualTime now);
  void enqueue_warmup(uint64_t fn_id, VirtualTime now);
  void dispatch(uint64_t fn_id, bool large);
  void run_task(uint64_t fn_id, bool large, VirtualTime start);
  void requeue_tasks(FnState& f, VirtualTime now);

  void on_op_result(uint64_t fn_id, const FnOpResult& res, VirtualTime completed);

  void do_put(const ObjectKey& key, Blob payload, PutCallback cb);
  void do_get(const ObjectKey& key, GetCallback cb);

  // GET machinery.
  void read_chunk_logical(const ChunkRef& ref, ReadCtxPtr ctx, VirtualTime now);
  void serve_read_attempt(const ChunkRef& ref, ReadCtxPtr ctx, VirtualTime now);
  void deliver_chunk(const ReadCtxPtr& ctx, const Blob& payload, VirtualTime now);
  void handle_absent(uint64_t fn_id, const ChunkRef& ref, ReadCtxPtr ctx, VirtualTime now);
  void start_ondemand_migration(const ChunkRef& ref, ReadCtxPtr ctx, VirtualTime now);
  void start_demand_cache_load(const ChunkRef& ref, uint64_t target, ReadCtxPtr ctx,
                               VirtualTime now);
  std::optional<uint64_t> demand_cache_candidate(const ChunkRef& ref, VirtualTime now);

  // Lazy migration.
  void consider_lazy_migration(const ObjectKey& key, VirtualTime now);
  void run_migration_round(const ObjectKey& key, VirtualTime started_at);
  void migrate_chunk(const ChunkRef& ref, VirtualTime now,
                     std::function<void(const Blob&)> on_done);

  // Recovery orchestration.
  void handle_failure_signal(uint64_t fn_id, uint64_t diff, VirtualTime now);
  void start_recovery(uint64_t fn_id, uint64_t diff, VirtualTime now,
                      std::vector<std::pair<ChunkRef, ReadCtxPtr>> carried_waiters);
  void route_blocked_read(RecoveryState& rec, const ChunkRef& ref, ReadCtxPtr ctx);
  void abort_parallel(RecoveryState& rec);
  void release_engagements(RecoveryState& rec, VirtualTime now);
  void setup_parallel(RecoveryState& rec, VirtualTime now);
  void schedule_helper_fetch(const std::shared_ptr<RecoveryState>& rec, uint32_t shard,
                             VirtualTime now);
  void helper_fetch_done(uint64_t fn_id, uint64_t epoch, uint32_t shard, VirtualTime now);
  void finish_local_replay(uint64_t fn_id, uint64_t epoch, VirtualTime now);
  void resume_waiter_on(uint64_t target_fn, const ChunkRef& ref, ReadCtxPtr ctx,
                        VirtualTime now);
  std::optional<uint64_t> pick_one_helper(const RecoveryState& rec, VirtualTime now,
                                          uint32_t* freshly_deployed);

  // Maintenance.
  void warmup_sweep(VirtualTime now);
  void schedule_periodic();
  void rotation_tick();
  void warmup_tick();
  void sample_tick();

  void register_function(uint64_t id, uint32_t group, uint32_t slot, bool helper,
                         VirtualTime now);
  void log_queue_event(VirtualTime at, uint64_t fn, bool large, QueueEvent::Kind kind,
                       TaskKind task, uint64_t bytes, uint32_t occupancy);

  // ---- data ----
  std::string name_;
  SystemConfig cfg_;
  Engine* engine_;
  Platform* platform_;
  CosStore* cos_;
  CostLedger* ledger_;
  Rng rng_;
  uint64_t hardcap_ = 0;

  std::map<uint64_t, FnState> fns_;
  std::vector<FunctionGroup> groups_;
  std::map<int64_t, IBucket> buckets_;
  int64_t current_bucket_ = -1;
  std::vector<uint32_t> open_groups_;  // creation order; each contributes O slots
  std::vector<uint64_t> open_slots_;   // flattened member ids

  std::map<ChunkRef, MappingEntry> mapping_;
  std::map<ObjectKey, ObjectMeta> objects_;

  std::map<ChunkRef, std::vector<std::pair<ReadCtxPtr, VirtualTime>>> migration_inflight_;
  std::set<ObjectKey> lazy_inflight_;
  std::map<ObjectKey, std::vector<ChunkRef>> lazy_remaining_;

  std::map<uint64_t, std::shared_ptr<RecoveryState>> recovering_;
  std::set<uint64_t> engaged_helpers_;
  uint64_t next_epoch_ = 1;

  DaemonCounters counters_;
  HitStats hits_;
  std::vector<PlacementEvent> placements_;
  std::vector<std::pair<size_t, uint32_t>> seals_;
  std::vector<RotationEvent> rotations_;
  std::vector<QueueEvent> queue_log_;
  std::vector<RecoveryReport> recovery_reports_;
  std::vector<FnSample> samples_;
  bool started_ = false;
};

}  // namespace smstore
