#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smstore/bytes.hpp"
#include "smstore/cos.hpp"
#include "smstore/keys.hpp"

namespace smstore {

// One insertion-log record. Eviction records exist so that replaying
// snapshot + log suffix reproduces the exact live chunk set, not a superset.
enum class LogRecordKind : uint8_t {
  put_storage = 0,  // chunk placed in the storage partition
  put_cache = 1,    // chunk loaded into cache space on demand
  evict = 2,        // cache chunk dropped to make room
};

struct LogRecord {
  LogRecordKind kind = LogRecordKind::put_storage;
  ChunkRef ref;
  uint64_t size = 0;     // payload bytes
  std::string cos_key;   // durable copy location

  bool operator==(const LogRecord&) const = default;
};

// A sealed log node: all records one invocation appended, chained to the
// previous node by hash. term starts at 1; prev_hash is 0 for term 1.
// rank is the cumulative count of put records through this node, so the
// newest node alone tells a reader how far the log has advanced.
struct LogNodeData {
  uint64_t id_lambda = 0;
  uint64_t term = 0;
  uint64_t prev_hash = 0;
  uint64_t rank = 0;
  std::vector<LogRecord> records;

  bool operator==(const LogNodeData&) const = default;
};

// Canonical little-endian encoding (documented in README):
//   u64 id_lambda, u64 term, u64 prev_hash, u64 rank, u32 record_count,
//   then per record: u8 kind, u32 key_len, key bytes, u32 piece_id,
//   u32 chunk_id, u64 size, u32 cos_key_len, cos_key bytes.
Blob encode_log_node(const LogNodeData& node);
LogNodeData decode_log_node(const Blob& raw);

// Chain hash over (prev_hash, term, rank, records) — the id is deliberately
// excluded so a log can be replayed onto a replacement deployment.
uint64_t log_node_hash(const LogNodeData& node);

// Per-chunk snapshot entry; cache tells replay which partition to load into.
struct SnapshotChunk {
  ChunkRef ref;
  uint64_t size = 0;
  bool cache = false;
  std::string cos_key;

  bool operator==(const SnapshotChunk&) const = default;
};

struct SnapshotData {
  uint64_t id_lambda = 0;
  uint64_t seq = 0;           // snapshot sequence number, 1-based
  uint64_t covered_term = 0;  // all log terms <= this are folded in
  std::vector<SnapshotChunk> chunks;

  bool operator==(const SnapshotData&) const = default;
};

Blob encode_snapshot(const SnapshotData& snap);
SnapshotData decode_snapshot(const Blob& raw);

// Compact log head the daemon tracks per function (piggybacked on every
// response) and compares against the instance's local view.
struct LogHead {
  uint64_t term = 0;
  uint64_t node_hash = 0;
  uint64_t diff_rank = 0;       // total PUT records ever logged (evicts excluded)
  uint64_t snapshot_seq = 0;
  uint64_t snapshot_covered_term = 0;

  bool matches(const LogHead& o) const { return term == o.term && node_hash == o.node_hash; }
  bool operator==(const LogHead&) const = default;
};

struct ConsistencyOutcome {
  bool up_to_date = false;
  uint64_t diff = 0;  // put-record lag when failed
};

// Instance-side check: does the instance's local head match what the daemon
// last saw? A cold-started instance (term 0) fails with the full diff_rank.
ConsistencyOutcome consistency_check(const LogHead& local, const LogHead& expected);

enum class RecoveryMode { local_only, parallel };

// Parallel recovery pays 2g invocations up front (g shard fetches + g
// reroute engagements), so it only wins when the lag is clearly bigger.
RecoveryMode recovery_decision(uint64_t diff, uint32_t group_size, uint32_t k);

// Recovery work item: replaying these in order reproduces the chunk set.
struct ManifestOp {
  LogRecordKind kind = LogRecordKind::put_storage;
  ChunkRef ref;
  uint64_t size = 0;
  bool cache = false;  // partition for puts
  std::string cos_key;
};

struct Manifest {
  LogHead head;                 // state the replay reaches
  std::vector<ManifestOp> ops;  // snapshot chunks first, then suffix records
  uint64_t chunk_bytes = 0;     // total payload bytes the ops fetch
};

// Reads the newest snapshot (if any) and every log node with
// term > covered_term from the object store and flattens them into a replay
// plan. Throws MissingLogNodeError if the term sequence has a gap. The
// virtual latency of the reads is accumulated into *latency.
Manifest build_manifest(CosStore& cos, uint64_t id_lambda, VirtualTime now,
                        VirtualDuration* latency);

// Shard index for parallel recovery: hash of the chunk identity mod g.
uint32_t shard_of(const ChunkRef& ref, uint32_t group_size);

}  // namespace smstore
