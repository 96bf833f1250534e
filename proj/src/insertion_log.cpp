#include "smstore/insertion_log.hpp"

#include <algorithm>

#include "smstore/hash.hpp"

namespace smstore {
namespace {

void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }
void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; i++) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; i++) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}
void put_str(std::vector<uint8_t>& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out.insert(out.end(), s.begin(), s.end());
}

struct Reader {
  const uint8_t* p;
  const uint8_t* end;

  void need(size_t n) const {
    if (static_cast<size_t>(end - p) < n) throw StoreError("truncated log encoding");
  }
  uint8_t u8() {
    need(1);
    return *p++;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; i++) v |= static_cast<uint32_t>(*p++) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= static_cast<uint64_t>(*p++) << (8 * i);
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
};

void encode_record(std::vector<uint8_t>& out, const LogRecord& r) {
  put_u8(out, static_cast<uint8_t>(r.kind));
  put_str(out, r.ref.key.name());
  put_u32(out, r.ref.piece_id);
  put_u32(out, r.ref.chunk_id);
  put_u64(out, r.size);
  put_str(out, r.cos_key);
}

LogRecord decode_record(Reader& rd) {
  LogRecord r;
  r.kind = static_cast<LogRecordKind>(rd.u8());
  std::string key = rd.str();
  r.ref.key = ObjectKey(std::move(key));
  r.ref.piece_id = rd.u32();
  r.ref.chunk_id = rd.u32();
  r.size = rd.u64();
  r.cos_key = rd.str();
  return r;
}

}  // namespace

Blob encode_log_node(const LogNodeData& node) {
  std::vector<uint8_t> out;
  put_u64(out, node.id_lambda);
  put_u64(out, node.term);
  put_u64(out, node.prev_hash);
  put_u64(out, node.rank);
  put_u32(out, static_cast<uint32_t>(node.records.size()));
  for (const auto& r : node.records) encode_record(out, r);
  return Blob::take(std::move(out));
}

LogNodeData decode_log_node(const Blob& raw) {
  Reader rd{raw.data(), raw.data() + raw.size()};
  LogNodeData node;
  node.id_lambda = rd.u64();
  node.term = rd.u64();
  node.prev_hash = rd.u64();
  node.rank = rd.u64();
  uint32_t n = rd.u32();
  node.records.reserve(n);
  for (uint32_t i = 0; i < n; i++) node.records.push_back(decode_record(rd));
  if (rd.p != rd.end) throw StoreError("trailing bytes in log node");
  return node;
}

uint64_t log_node_hash(const LogNodeData& node) {
  std::vector<uint8_t> canon;
  put_u64(canon, node.prev_hash);
  put_u64(canon, node.term);
  put_u64(canon, node.rank);
  put_u32(canon, static_cast<uint32_t>(node.records.size()));
  for (const auto& r : node.records) encode_record(canon, r);
  return hash64(canon.data(), canon.size());
}

Blob encode_snapshot(const SnapshotData& snap) {
  std::vector<uint8_t> out;
  put_u64(out, snap.id_lambda);
  put_u64(out, snap.seq);
  put_u64(out, snap.covered_term);
  put_u32(out, static_cast<uint32_t>(snap.chunks.size()));
  for (const auto& c : snap.chunks) {
    put_str(out, c.ref.key.name());
    put_u32(out, c.ref.piece_id);
    put_u32(out, c.ref.chunk_id);
    put_u64(out, c.size);
    put_u8(out, c.cache ? 1 : 0);
    put_str(out, c.cos_key);
  }
  return Blob::take(std::move(out));
}

SnapshotData decode_snapshot(const Blob& raw) {
  Reader rd{raw.data(), raw.data() + raw.size()};
  SnapshotData snap;
  snap.id_lambda = rd.u64();
  snap.seq = rd.u64();
  snap.covered_term = rd.u64();
  uint32_t n = rd.u32();
  snap.chunks.reserve(n);
  for (uint32_t i = 0; i < n; i++) {
    SnapshotChunk c;
    c.ref.key = ObjectKey(rd.str());
    c.ref.piece_id = rd.u32();
    c.ref.chunk_id = rd.u32();
    c.size = rd.u64();
    c.cache = rd.u8() != 0;
    c.cos_key = rd.str();
    snap.chunks.push_back(std::move(c));
  }
  if (rd.p != rd.end) throw StoreError("trailing bytes in snapshot");
  return snap;
}

ConsistencyOutcome consistency_check(const LogHead& local, const LogHead& expected) {
  if (local.matches(expected)) return {true, 0};
  // The instance can legitimately be ahead of the caller's view: responses
  // carrying newer heads may still be in flight. Ahead is consistent; only
  // a shorter (or equal-length-but-divergent) local log means lost state.
  if (local.term > expected.term) return {true, 0};
  uint64_t diff;
  if (local.term == expected.term) {
    diff = expected.diff_rank;  // divergence: resync everything
  } else if (expected.diff_rank > local.diff_rank) {
    diff = expected.diff_rank - local.diff_rank;
  } else {
    diff = 0;
  }
  return {false, diff};
}

RecoveryMode recovery_decision(uint64_t diff, uint32_t group_size, uint32_t k) {
  if (diff > static_cast<uint64_t>(k) * group_size) return RecoveryMode::parallel;
  return RecoveryMode::local_only;
}

Manifest build_manifest(CosStore& cos, uint64_t id_lambda, VirtualTime now,
                        VirtualDuration* latency) {
  Manifest mf;
  VirtualDuration lat = 0;

  // Newest snapshot, if any.
  auto [snap_keys, snap_list_lat] = cos.list(CosKey::snapshot_prefix(id_lambda), now);
  lat += snap_list_lat;
  SnapshotData snap;
  if (!snap_keys.empty()) {
    auto [raw, get_lat] = cos.get(CosKey{snap_keys.back()}, now);
    lat += get_lat;
    snap = decode_snapshot(raw);
    for (const auto& c : snap.chunks) {
      mf.ops.push_back({c.cache ? LogRecordKind::put_cache : LogRecordKind::put_storage, c.ref,
                        c.size, c.cache, c.cos_key});
      mf.chunk_bytes += c.size;
    }
    mf.head.snapshot_seq = snap.seq;
    mf.head.snapshot_covered_term = snap.covered_term;
  }

  // Log nodes. Terms must be contiguous from 1 (nodes are never deleted);
  // only the suffix past the snapshot is fetched, plus the newest node for
  // the head hash and cumulative rank if the snapshot already covers it.
  auto [node_keys, node_list_lat] = cos.list(CosKey::log_prefix(id_lambda), now);
  lat += node_list_lat;
  uint64_t expect = 1;
  for (const auto& flat : node_keys) {
    uint64_t term = CosKey::trailing_hex(flat);
    if (term != expect) {
      throw MissingLogNodeError("log gap for deployment " + std::to_string(id_lambda) +
                                ": expected term " + std::to_string(expect) + ", found " +
                                std::to_string(term));
    }
    expect++;
    bool in_suffix = term > snap.covered_term;
    bool is_newest = flat == node_keys.back();
    if (!in_suffix && !is_newest) continue;

    auto [raw, get_lat] = cos.get(CosKey{flat}, now);
    lat += get_lat;
    LogNodeData node = decode_log_node(raw);
    if (in_suffix) {
      for (const auto& r : node.records) {
        mf.ops.push_back({r.kind, r.ref, r.size, r.kind == LogRecordKind::put_cache, r.cos_key});
        if (r.kind != LogRecordKind::evict) mf.chunk_bytes += r.size;
      }
    }
    if (is_newest) {
      mf.head.term = node.term;
      mf.head.node_hash = log_node_hash(node);
      mf.head.diff_rank = node.rank;
    }
  }
  if (latency) *latency += lat;
  return mf;
}

uint32_t shard_of(const ChunkRef& ref, uint32_t group_size) {
  Hasher h;
  h.update_bytes(ref.key.name());
  h.update_u32(ref.piece_id);
  h.update_u32(ref.chunk_id);
  return static_cast<uint32_t>(h.digest() % group_size);
}

}  // namespace smstore
