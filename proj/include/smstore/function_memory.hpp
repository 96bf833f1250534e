#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <vector>

#include "smstore/bytes.hpp"
#include "smstore/cos.hpp"
#include "smstore/faas.hpp"
#include "smstore/insertion_log.hpp"
#include "smstore/keys.hpp"

namespace smstore {

// One chunk-store work item inside a store invocation.
struct StoreChunkItem {
  ChunkRef ref;
  Blob payload;            // provided for fresh writes; empty when fetching
  bool fetch_from_cos = false;  // migration / cache load: payload comes from COS
  bool cache = false;           // cache partition instead of storage
  bool persist = false;         // write payload to COS (fresh data only)
};

// Common outcome of every instance-side operation: timing plus the
// piggybacked log head and memory usage the daemon tracks.
struct FnOpResult {
  VirtualDuration exec = 0;
  bool consistency_failed = false;
  uint64_t consistency_diff = 0;
  LogHead head;
  uint64_t storage_bytes = 0;
  uint64_t cache_bytes = 0;
  // For store invocations: the payload actually stored per item (fetched
  // from COS for migrations/cache loads), so requesters can be answered
  // without a second read.
  std::vector<Blob> stored;
};

// What a storage function keeps in RAM: the storage partition (placed
// chunks), cache space (demand-loaded copies, LRU evicted), transient
// recovery shards, and the local view of its insertion-log head. All
// mutation goes through the operation methods, which append to the
// insertion log exactly as a real handler would.
class FunctionMemory : public InstanceMemory {
 public:
  FunctionMemory(uint64_t id_lambda, uint64_t memory_limit, uint32_t snapshot_every,
                 uint64_t exec_bytes_per_sec)
      : id_(id_lambda),
        limit_(memory_limit),
        snapshot_every_(snapshot_every),
        exec_bps_(exec_bytes_per_sec) {}

  uint64_t used_bytes() const override { return storage_bytes_ + cache_bytes_ + shard_bytes_; }
  uint64_t storage_bytes() const { return storage_bytes_; }
  uint64_t cache_bytes() const { return cache_bytes_; }
  uint64_t shard_bytes() const { return shard_bytes_; }
  const LogHead& local_head() const { return head_; }
  size_t chunk_count() const { return chunks_.size(); }

  // PUT-serving invocation: store every item, persist fresh payloads, seal
  // one log node with all records (evictions included), maybe snapshot.
  // `expected` is the daemon's head; a mismatch is reported and the log then
  // continues from the daemon's head so terms never collide in COS.
  FnOpResult store_chunks(const std::vector<StoreChunkItem>& items, const LogHead& expected,
                          CosStore& cos, VirtualTime now);

  // GET-serving invocation: memory-only lookup (storage, then cache, then
  // recovery shard). Touches LRU. Absent payload means the daemon must
  // reroute or recover; the instance never falls back to COS here.
  struct ReadOutcome {
    FnOpResult op;
    std::optional<Blob> payload;
  };
  ReadOutcome read_chunk(const ChunkRef& ref, const LogHead& expected, VirtualTime now);

  // Keep-alive ping; zero work, carries the head for failure detection.
  FnOpResult warmup(const LogHead& expected);

  // Local recovery replay: applies manifest ops (skipping refs already
  // re-written by newer puts), fetching payloads from COS. Returns the
  // transfer+insert duration; the daemon materializes this at the replay's
  // completion event.
  FnOpResult apply_manifest(const Manifest& mf, CosStore& cos, VirtualTime now);

  // Helper-side shard load: fetches the given ops' chunks into transient
  // shard space. Never logged, never evicts resident data; chunks that do
  // not fit are skipped (reads fall back to the recovering function).
  FnOpResult load_shard(const std::vector<ManifestOp>& ops, CosStore& cos, VirtualTime now);
  void drop_shards();

  // True when `ref` is resident in any partition (no LRU touch).
  bool holds(const ChunkRef& ref) const;

 private:
  struct Resident {
    Blob payload;
    bool cache = false;
    std::list<ChunkRef>::iterator lru_it;  // valid only for cache entries
  };

  VirtualDuration compute_time(uint64_t bytes) const {
    if (exec_bps_ == 0) return 0;
    return static_cast<VirtualDuration>(static_cast<__int128>(bytes) * kSecond / exec_bps_);
  }

  // Inserts into storage/cache, evicting LRU cache entries (and appending
  // evict records) as needed. Returns false if the chunk cannot fit.
  bool insert(const ChunkRef& ref, Blob payload, bool cache, std::vector<LogRecord>& evicts);
  void erase_resident(std::map<ChunkRef, Resident>::iterator it);
  ConsistencyOutcome check_and_adopt(const LogHead& expected, FnOpResult& out);
  VirtualDuration seal_node(std::vector<LogRecord> records, CosStore& cos, VirtualTime now);
  VirtualDuration maybe_snapshot(CosStore& cos, VirtualTime now);

  uint64_t id_;
  uint64_t limit_;
  uint32_t snapshot_every_;
  uint64_t exec_bps_;

  std::map<ChunkRef, Resident> chunks_;
  std::list<ChunkRef> lru_;  // cache entries, least recent first
  std::map<ChunkRef, Blob> shards_;
  uint64_t storage_bytes_ = 0;
  uint64_t cache_bytes_ = 0;
  uint64_t shard_bytes_ = 0;

  LogHead head_;
  uint64_t seals_since_snapshot_ = 0;
};

// Runtime that cold-starts FunctionMemory instances for the platform.
class StoreRuntime : public Runtime {
 public:
  StoreRuntime(uint64_t memory_limit, uint32_t snapshot_every, uint64_t exec_bytes_per_sec)
      : limit_(memory_limit), snapshot_every_(snapshot_every), exec_bps_(exec_bytes_per_sec) {}

  std::unique_ptr<InstanceMemory> make_cold_memory(uint64_t id_lambda) override {
    return std::make_unique<FunctionMemory>(id_lambda, limit_, snapshot_every_, exec_bps_);
  }

 private:
  uint64_t limit_;
  uint32_t snapshot_every_;
  uint64_t exec_bps_;
};

}  // namespace smstore
