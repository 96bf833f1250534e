#include "smstore/function_memory.hpp"

#include <algorithm>

namespace smstore {

ConsistencyOutcome FunctionMemory::check_and_adopt(const LogHead& expected, FnOpResult& out) {
  ConsistencyOutcome c = consistency_check(head_, expected);
  if (!c.up_to_date) {
    out.consistency_failed = true;
    out.consistency_diff = c.diff;
    // Adopt the daemon's head for log sequencing: new nodes must extend the
    // durable chain, not overwrite it, even though memory content lags.
    if (expected.term > head_.term) head_ = expected;
  }
  return c;
}

void FunctionMemory::erase_resident(std::map<ChunkRef, Resident>::iterator it) {
  if (it->second.cache) {
    cache_bytes_ -= it->second.payload.size();
    lru_.erase(it->second.lru_it);
  } else {
    storage_bytes_ -= it->second.payload.size();
  }
  chunks_.erase(it);
}

bool FunctionMemory::insert(const ChunkRef& ref, Blob payload, bool cache,
                            std::vector<LogRecord>& evicts) {
  // Re-insert replaces in place (object overwrite or repeated migration).
  auto it = chunks_.find(ref);
  if (it != chunks_.end()) erase_resident(it);

  uint64_t need = payload.size();
  // Evict least-recently-used cache entries until the chunk fits.
  while (used_bytes() + need > limit_ && !lru_.empty()) {
    auto victim = chunks_.find(lru_.front());
    evicts.push_back({LogRecordKind::evict, victim->first, victim->second.payload.size(),
                      CosKey::chunk(victim->first).flat});
    erase_resident(victim);
  }
  // Shards are transient and droppable under pressure from real data.
  if (used_bytes() + need > limit_ && shard_bytes_ > 0 && !cache) {
    drop_shards();
  }
  if (used_bytes() + need > limit_) return false;

  Resident r;
  r.payload = std::move(payload);
  r.cache = cache;
  if (cache) {
    lru_.push_back(ref);
    r.lru_it = std::prev(lru_.end());
    cache_bytes_ += need;
  } else {
    storage_bytes_ += need;
  }
  chunks_.emplace(ref, std::move(r));
  return true;
}

VirtualDuration FunctionMemory::seal_node(std::vector<LogRecord> records, CosStore& cos,
                                          VirtualTime now) {
  LogNodeData node;
  node.id_lambda = id_;
  node.term = head_.term + 1;
  node.prev_hash = head_.node_hash;
  uint64_t puts = 0;
  for (const auto& r : records) {
    if (r.kind != LogRecordKind::evict) puts++;
  }
  node.rank = head_.diff_rank + puts;
  node.records = std::move(records);

  VirtualDuration lat = cos.put(CosKey::log_node(id_, node.term), encode_log_node(node), now);
  head_.term = node.term;
  head_.node_hash = log_node_hash(node);
  head_.diff_rank = node.rank;
  seals_since_snapshot_++;
  return lat;
}

VirtualDuration FunctionMemory::maybe_snapshot(CosStore& cos, VirtualTime now) {
  if (snapshot_every_ == 0 || seals_since_snapshot_ < snapshot_every_) return 0;
  SnapshotData snap;
  snap.id_lambda = id_;
  snap.seq = head_.snapshot_seq + 1;
  snap.covered_term = head_.term;
  for (const auto& [ref, res] : chunks_) {
    snap.chunks.push_back(
        {ref, res.payload.size(), res.cache, CosKey::chunk(ref).flat});
  }
  VirtualDuration lat = cos.put(CosKey::snapshot(id_, snap.seq), encode_snapshot(snap), now);
  head_.snapshot_seq = snap.seq;
  head_.snapshot_covered_term = snap.covered_term;
  seals_since_snapshot_ = 0;
  return lat;
}

FnOpResult FunctionMemory::store_chunks(const std::vector<StoreChunkItem>& items,
                                        const LogHead& expected, CosStore& cos,
                                        VirtualTime now) {
  FnOpResult out;
  check_and_adopt(expected, out);

  std::vector<LogRecord> records;
  for (const auto& item : items) {
    Blob payload = item.payload;
    if (item.fetch_from_cos) {
      auto [blob, lat] = cos.get(CosKey::chunk(item.ref), now);
      out.exec += lat;
      payload = std::move(blob);
    }
    if (item.persist) {
      out.exec += cos.put(CosKey::chunk(item.ref), payload, now);
    }
    out.exec += compute_time(payload.size());
    out.stored.push_back(payload);

    uint64_t size = payload.size();
    if (!insert(item.ref, std::move(payload), item.cache, records)) {
      throw StoreError("function " + std::to_string(id_) + " memory full: chunk of " +
                       std::to_string(size) + " bytes does not fit");
    }
    records.push_back({item.cache ? LogRecordKind::put_cache : LogRecordKind::put_storage,
                       item.ref, size, CosKey::chunk(item.ref).flat});
  }

  out.exec += seal_node(std::move(records), cos, now);
  out.exec += maybe_snapshot(cos, now);
  out.head = head_;
  out.storage_bytes = storage_bytes_;
  out.cache_bytes = cache_bytes_;
  return out;
}

FunctionMemory::ReadOutcome FunctionMemory::read_chunk(const ChunkRef& ref,
                                                       const LogHead& expected,
                                                       VirtualTime /*now*/) {
  ReadOutcome out;
  check_and_adopt(expected, out.op);

  auto it = chunks_.find(ref);
  if (it != chunks_.end()) {
    if (it->second.cache) {
      lru_.erase(it->second.lru_it);
      lru_.push_back(ref);
      it->second.lru_it = std::prev(lru_.end());
    }
    out.payload = it->second.payload;
    out.op.exec = compute_time(it->second.payload.size());
  } else {
    auto sh = shards_.find(ref);
    if (sh != shards_.end()) {
      out.payload = sh->second;
      out.op.exec = compute_time(sh->second.size());
    }
  }
  out.op.head = head_;
  out.op.storage_bytes = storage_bytes_;
  out.op.cache_bytes = cache_bytes_;
  return out;
}

FnOpResult FunctionMemory::warmup(const LogHead& expected) {
  FnOpResult out;
  check_and_adopt(expected, out);
  out.head = head_;
  out.storage_bytes = storage_bytes_;
  out.cache_bytes = cache_bytes_;
  return out;
}

FnOpResult FunctionMemory::apply_manifest(const Manifest& mf, CosStore& cos, VirtualTime now) {
  FnOpResult out;
  // Refs written while recovery was in flight are newer than the manifest;
  // replay must not clobber them, and manifest evicts only apply to chunks
  // the replay itself brought in.
  std::vector<LogRecord> evicts;  // discarded: replay does not re-log
  std::map<ChunkRef, bool> replayed;
  for (const auto& op : mf.ops) {
    if (op.kind == LogRecordKind::evict) {
      auto mine = replayed.find(op.ref);
      if (mine != replayed.end()) {
        auto it = chunks_.find(op.ref);
        if (it != chunks_.end()) erase_resident(it);
        replayed.erase(mine);
      }
      continue;
    }
    if (chunks_.count(op.ref) && !replayed.count(op.ref)) continue;  // newer write wins
    auto [blob, lat] = cos.get(CosKey{op.cos_key}, now);
    out.exec += lat;
    out.exec += compute_time(blob.size());
    if (!insert(op.ref, std::move(blob), op.cache, evicts)) {
      throw StoreError("recovery replay does not fit in function memory");
    }
    replayed[op.ref] = true;
  }
  if (head_.term < mf.head.term) head_ = mf.head;
  // Replay-induced evictions (memory pressure during restore) must still be
  // durable, or a later replay would resurrect the evicted cache entries.
  if (!evicts.empty()) out.exec += seal_node(std::move(evicts), cos, now);
  out.head = head_;
  out.storage_bytes = storage_bytes_;
  out.cache_bytes = cache_bytes_;
  return out;
}

FnOpResult FunctionMemory::load_shard(const std::vector<ManifestOp>& ops, CosStore& cos,
                                      VirtualTime now) {
  FnOpResult out;
  for (const auto& op : ops) {
    if (op.kind == LogRecordKind::evict) {
      auto it = shards_.find(op.ref);
      if (it != shards_.end()) {
        shard_bytes_ -= it->second.size();
        shards_.erase(it);
      }
      continue;
    }
    auto [blob, lat] = cos.get(CosKey{op.cos_key}, now);
    out.exec += lat;
    out.exec += compute_time(blob.size());
    if (used_bytes() + blob.size() > limit_) continue;  // skip, stay safe
    auto it = shards_.find(op.ref);
    if (it != shards_.end()) {
      shard_bytes_ -= it->second.size();
      it->second = std::move(blob);
      shard_bytes_ += it->second.size();
    } else {
      shard_bytes_ += blob.size();
      shards_.emplace(op.ref, std::move(blob));
    }
  }
  out.head = head_;
  out.storage_bytes = storage_bytes_;
  out.cache_bytes = cache_bytes_;
  return out;
}

void FunctionMemory::drop_shards() {
  shards_.clear();
  shard_bytes_ = 0;
}

bool FunctionMemory::holds(const ChunkRef& ref) const {
  return chunks_.count(ref) != 0 || shards_.count(ref) != 0;
}

}  // namespace smstore
