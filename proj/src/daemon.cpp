#include "smstore/daemon.hpp"

#include <algorithm>
#include <cstring>

#include "smstore/chunking.hpp"
#include "smstore/erasure.hpp"
#include "smstore/hash.hpp"

namespace smstore {

const char* bucket_state_name(BucketState s) {
  switch (s) {
    case BucketState::current: return "current";
    case BucketState::active: return "active";
    case BucketState::degraded: return "degraded";
    case BucketState::retired: return "retired";
  }
  return "?";
}

Daemon::Daemon(std::string name, const SystemConfig& cfg, Engine* engine, Platform* platform,
               CosStore* cos, CostLedger* ledger, Rng rng)
    : name_(std::move(name)),
      cfg_(cfg),
      engine_(engine),
      platform_(platform),
      cos_(cos),
      ledger_(ledger),
      rng_(rng) {
  hardcap_ = static_cast<uint64_t>(static_cast<double>(cfg_.faas.memory_limit) *
                                   cfg_.daemon.hardcap_fraction);
}

Daemon::FnState& Daemon::fn(uint64_t id) {
  auto it = fns_.find(id);
  if (it == fns_.end()) throw StoreError("daemon has no function " + std::to_string(id));
  return it->second;
}

const Daemon::FnState& Daemon::fn(uint64_t id) const {
  auto it = fns_.find(id);
  if (it == fns_.end()) throw StoreError("daemon has no function " + std::to_string(id));
  return it->second;
}

int64_t Daemon::bucket_of_group(uint32_t group) const { return groups_[group].bucket; }

BucketState Daemon::bucket_state(int64_t bucket) const {
  auto it = buckets_.find(bucket);
  if (it == buckets_.end()) return BucketState::retired;
  return it->second.state;
}

bool Daemon::fn_serving(const FnState& f) const {
  return !f.removed && !platform_->is_retired(f.id);
}

// ---------------------------------------------------------------- lifecycle

void Daemon::start() {
  if (started_) return;
  started_ = true;
  VirtualTime now = engine_->now();
  int64_t idx = cfg_.daemon.elastic ? now / cfg_.daemon.bucket_interval : 0;
  current_bucket_ = idx;
  buckets_[idx] = IBucket{idx, BucketState::current, {}};
  rotations_.push_back({now, idx, BucketState::current});
  if (!cfg_.daemon.elastic) bootstrap_fixed_pool();
  schedule_periodic();
  sample_now();
}

void Daemon::bootstrap_fixed_pool() {
  for (uint32_t i = 0; i < cfg_.daemon.fixed_pool_groups; i++) {
    launch_group(engine_->now(), /*count_as_scale_out=*/false);
  }
}

void Daemon::schedule_periodic() {
  if (cfg_.daemon.elastic) {
    VirtualTime next =
        (engine_->now() / cfg_.daemon.bucket_interval + 1) * cfg_.daemon.bucket_interval;
    engine_->schedule(next, [this]() { rotation_tick(); }, /*weak=*/true);
  }
  engine_->schedule_in(cfg_.daemon.warmup_poll, [this]() { warmup_tick(); }, /*weak=*/true);
  engine_->schedule_in(cfg_.daemon.sample_interval, [this]() { sample_tick(); }, /*weak=*/true);
}

void Daemon::rotation_tick() {
  maybe_rotate(engine_->now());
  VirtualTime next =
      (engine_->now() / cfg_.daemon.bucket_interval + 1) * cfg_.daemon.bucket_interval;
  engine_->schedule(next, [this]() { rotation_tick(); }, /*weak=*/true);
}

void Daemon::warmup_tick() {
  warmup_sweep(engine_->now());
  engine_->schedule_in(cfg_.daemon.warmup_poll, [this]() { warmup_tick(); }, /*weak=*/true);
}

void Daemon::sample_tick() {
  sample_now();
  engine_->schedule_in(cfg_.daemon.sample_interval, [this]() { sample_tick(); }, /*weak=*/true);
}

void Daemon::maybe_rotate(VirtualTime now) {
  if (!cfg_.daemon.elastic || !started_) return;
  int64_t idx = now / cfg_.daemon.bucket_interval;
  while (current_bucket_ < idx) {
    int64_t next = current_bucket_ + 1;

    // Open groups follow the new current bucket; everything else ages.
    IBucket& old_cur = buckets_[current_bucket_];
    std::vector<uint32_t> moving;
    for (uint32_t g : old_cur.groups) {
      if (!groups_[g].sealed) moving.push_back(g);
    }
    for (uint32_t g : moving) {
      old_cur.groups.erase(std::find(old_cur.groups.begin(), old_cur.groups.end(), g));
      groups_[g].bucket = next;
    }

    buckets_[next] = IBucket{next, BucketState::current, std::move(moving)};
    current_bucket_ = next;
    rotations_.push_back({now, next, BucketState::current});

    std::vector<int64_t> to_erase;
    for (auto& [bidx, bucket] : buckets_) {
      if (bidx == next) continue;
      int64_t age = next - bidx;
      BucketState want;
      if (age < static_cast<int64_t>(cfg_.daemon.active_intervals)) {
        want = BucketState::active;
      } else if (age < static_cast<int64_t>(cfg_.daemon.degraded_intervals)) {
        want = BucketState::degraded;
      } else {
        want = BucketState::retired;
      }
      if (bucket.state != want) {
        bucket.state = want;
        rotations_.push_back({now, bidx, want});
        if (want == BucketState::retired) {
          retire_bucket(bucket, now);
          to_erase.push_back(bidx);
        }
      }
    }
    for (int64_t b : to_erase) buckets_.erase(b);
    sample_now();
  }
}

void Daemon::retire_bucket(IBucket& bucket, VirtualTime now) {
  for (uint32_t g : bucket.groups) {
    FunctionGroup& grp = groups_[g];
    grp.sealed = true;  // defensive; open groups never live in old buckets
    for (uint64_t id : grp.members) remove_function(id, now);
  }
  bucket.groups.clear();
}

void Daemon::remove_function(uint64_t id, VirtualTime now) {
  FnState& f = fn(id);
  if (f.removed) return;
  f.removed = true;
  counters_.retired_functions++;

  // Abort any recovery owned by this function; blocked readers re-route to
  // the on-demand-migration path once the mapping sees it as removed.
  auto rit = recovering_.find(id);
  if (rit != recovering_.end()) {
    auto rec = rit->second;
    recovery_reports_[rec->report_index].restarted = true;
    release_engagements(*rec, now);
    std::vector<std::pair<ChunkRef, ReadCtxPtr>> blocked = std::move(rec->waiters);
    for (auto& sw : rec->shard_waiters) {
      for (auto& w : sw) blocked.push_back(std::move(w));
    }
    recovering_.erase(rit);
    f.recovering = false;
    for (auto& [ref, ctx] : blocked) serve_read_attempt(ref, ctx, now);
  }

  if (!platform_->is_retired(id)) platform_->retire(id);
  requeue_tasks(f, now);
}

void Daemon::requeue_tasks(FnState& f, VirtualTime now) {
  auto drain = [&](Channel& ch) {
    std::deque<std::unique_ptr<Task>> tasks;
    tasks.swap(ch.waiting);
    for (auto& t : tasks) {
      switch (t->kind) {
        case TaskKind::warmup:
          f.warmup_pending = false;
          break;
        case TaskKind::read: {
          // Deliver "absent"; the absent path re-routes around the removal.
          FunctionMemory::ReadOutcome out;
          out.op.head = f.head;
          t->read_done(std::move(out));
          break;
        }
        case TaskKind::store:
          for (auto& s : t->stores) {
            if (s.item.persist) {
              // Fresh write: place again and re-point the mapping.
              StoreItemCtx ctx = std::move(s);
              uint64_t target =
                  place_chunk(ctx.item.ref.chunk_id, ctx.item.payload.size(), now,
                              nullptr, nullptr);
              mapping_[ctx.item.ref].storage_owner = target;
              enqueue_store(target, std::move(ctx), now);
            } else if (s.done) {
              // Fetch-type item (migration / cache load): signal failure, the
              // issuing flow re-drives itself.
              FnOpResult failed;
              failed.head = f.head;
              s.done(failed, Blob());
            }
          }
          break;
      }
    }
  };
  drain(f.small_q);
  drain(f.large_q);
}

// ---------------------------------------------------------------- placement

uint32_t Daemon::launch_group(VirtualTime now, bool count_as_scale_out) {
  uint32_t gidx = static_cast<uint32_t>(groups_.size());
  FunctionGroup grp;
  grp.index = gidx;
  grp.bucket = current_bucket_;
  for (uint32_t slot = 0; slot < cfg_.ec.total(); slot++) {
    uint64_t id = platform_->deploy(now);
    grp.members.push_back(id);
    register_function(id, gidx, slot, /*helper=*/false, now);
  }
  groups_.push_back(grp);
  buckets_[current_bucket_].groups.push_back(gidx);
  open_groups_.push_back(gidx);
  rebuild_open_slots();
  if (count_as_scale_out) counters_.scale_outs++;
  sample_now();
  return gidx;
}

void Daemon::seal_group(uint32_t group) {
  if (groups_[group].sealed) return;
  groups_[group].sealed = true;
  seals_.push_back({placements_.size(), group});
  auto it = std::find(open_groups_.begin(), open_groups_.end(), group);
  if (it != open_groups_.end()) open_groups_.erase(it);
  rebuild_open_slots();
}

void Daemon::rebuild_open_slots() {
  open_slots_.clear();
  for (uint32_t g : open_groups_) {
    for (uint64_t id : groups_[g].members) open_slots_.push_back(id);
  }
}

void Daemon::register_function(uint64_t id, uint32_t group, uint32_t slot, bool helper,
                               VirtualTime now) {
  FnState f;
  f.id = id;
  f.group = group;
  f.slot = slot;
  f.helper = helper;
  f.last_activity = now;

  // Pre-assign the recovery helper group from functions present right now.
  std::vector<uint64_t> pool;
  for (const auto& [oid, other] : fns_) {
    if (oid != id && !other.removed) pool.push_back(oid);
  }
  uint32_t want = std::min<uint32_t>(cfg_.daemon.recovery_group,
                                     static_cast<uint32_t>(pool.size()));
  for (uint32_t i = 0; i < want; i++) {
    size_t j = i + rng_.bounded(pool.size() - i);
    std::swap(pool[i], pool[j]);
    f.preassigned_helpers.push_back(pool[i]);
  }
  fns_.emplace(id, std::move(f));
}

uint64_t Daemon::place_chunk(uint32_t chunk_id, uint64_t size, VirtualTime now,
                             uint32_t* rejections_out, bool* scaled_out) {
  if (size > hardcap_) {
    throw StoreError("chunk of " + std::to_string(size) +
                     " bytes exceeds the per-function storage cap");
  }
  uint32_t rejections = 0;
  bool scaled = false;
  std::vector<uint32_t> seal_after;  // groups that hit the cap during the walk
  const uint32_t O = cfg_.ec.total();

  uint64_t ptr = chunk_id;
  uint64_t chosen = 0;
  // Each probe inspects one open group's slot for this chunk's residue
  // class and advances by O on rejection. Bounded: in elastic mode a fresh
  // group always accepts; in fixed mode we fall back to the least-loaded
  // candidate with storage room after one full lap.
  uint64_t best_fallback = 0;
  size_t best_occupancy = SIZE_MAX;
  size_t probes_left = cfg_.daemon.elastic ? 0 : open_groups_.size();

  while (true) {
    if (ptr >= open_slots_.size()) {
      if (cfg_.daemon.elastic) {
        launch_group(now, /*count_as_scale_out=*/true);
        scaled = true;
        continue;
      }
      if (open_slots_.empty()) throw StoreError("fixed pool has no functions");
      ptr %= open_slots_.size();  // pool size is a multiple of O: residue kept
    }
    uint64_t cand = open_slots_[ptr];
    FnState& f = fns_.at(cand);

    bool cap_ok = f.admitted_bytes + size <= hardcap_;
    Channel& ch = channel_for(f, size);
    bool queue_ok = ch.occupancy() < cfg_.daemon.queue_capacity;

    if (cap_ok && queue_ok) {
      chosen = cand;
      break;
    }
    rejections++;
    if (!cap_ok) seal_after.push_back(f.group);
    if (cap_ok && ch.occupancy() < best_occupancy) {
      best_occupancy = ch.occupancy();
      best_fallback = cand;
    }
    ptr += O;
    if (!cfg_.daemon.elastic && --probes_left == 0) {
      if (best_occupancy == SIZE_MAX) {
        // Every candidate is at its storage cap: overloaded fixed pool.
        throw StoreError("fixed pool exhausted: no function can accept the chunk");
      }
      chosen = best_fallback;  // over-capacity queueing, latency absorbs it
      break;
    }
  }

  FnState& target = fns_.at(chosen);
  target.admitted_bytes += size;
  for (uint32_t g : seal_after) seal_group(g);

  if (rejections_out) *rejections_out = rejections;
  if (scaled_out) *scaled_out = scaled;
  return chosen;
}

// ------------------------------------------------------------------- queues

Daemon::Channel& Daemon::channel_for(FnState& f, uint64_t bytes) {
  return bytes >= cfg_.daemon.large_threshold ? f.large_q : f.small_q;
}

bool Daemon::queue_full(const FnState& f, uint64_t bytes) const {
  const Channel& ch = bytes >= cfg_.daemon.large_threshold ? f.large_q : f.small_q;
  return ch.occupancy() >= cfg_.daemon.queue_capacity;
}

void Daemon::log_queue_event(VirtualTime at, uint64_t fn_id, bool large, QueueEvent::Kind kind,
                             TaskKind task, uint64_t bytes, uint32_t occupancy) {
  queue_log_.push_back(
      {at, fn_id, large, kind, static_cast<uint8_t>(task), bytes, occupancy});
}

void Daemon::enqueue_store(uint64_t fn_id, StoreItemCtx ctx, VirtualTime now) {
  FnState& f = fn(fn_id);
  if (f.removed || platform_->is_retired(fn_id)) {
    if (ctx.done) {
      FnOpResult failed;
      failed.head = f.head;
      ctx.done(failed, Blob());
    }
    return;
  }
  uint64_t bytes = ctx.item.payload.size();
  if (ctx.item.fetch_from_cos) {
    auto it = mapping_.find(ctx.item.ref);
    if (it != mapping_.end()) bytes = it->second.size;
  }
  bool large = bytes >= cfg_.daemon.large_threshold;
  Channel& ch = large ? f.large_q : f.small_q;

  // Writes arriving within the consolidation window ride the same
  // invocation (one log node for all of them).
  if (!ch.waiting.empty()) {
    Task* tail = ch.waiting.back().get();
    if (tail->kind == TaskKind::store &&
        now - tail->created <= cfg_.daemon.consolidation_window) {
      tail->bytes += bytes;
      tail->stores.push_back(std::move(ctx));
      if (f.recovering) recovering_.at(fn_id)->fresh_refs.insert(tail->stores.back().item.ref);
      return;
    }
  }

  auto task = std::make_unique<Task>();
  task->kind = TaskKind::store;
  task->created = now;
  task->bytes = bytes;
  task->stores.push_back(std::move(ctx));
  if (f.recovering) recovering_.at(fn_id)->fresh_refs.insert(task->stores.back().item.ref);
  ch.waiting.push_back(std::move(task));
  log_queue_event(now, fn_id, large, QueueEvent::enqueue, TaskKind::store, bytes,
                  static_cast<uint32_t>(ch.occupancy()));
  dispatch(fn_id, large);
}

void Daemon::enqueue_read(uint64_t fn_id, const ChunkRef& ref, uint64_t bytes,
                          std::function<void(FunctionMemory::ReadOutcome)> done,
                          VirtualTime now) {
  FnState& f = fn(fn_id);
  if (f.removed || platform_->is_retired(fn_id)) {
    FunctionMemory::ReadOutcome out;
    out.op.head = f.head;
    done(std::move(out));
    return;
  }
  bool large = bytes >= cfg_.daemon.large_threshold;
  Channel& ch = large ? f.large_q : f.small_q;
  auto task = std::make_unique<Task>();
  task->kind = TaskKind::read;
  task->created = now;
  task->read_ref = ref;
  task->read_done = std::move(done);
  task->bytes = bytes;
  ch.waiting.push_back(std::move(task));
  log_queue_event(now, fn_id, large, QueueEvent::enqueue, TaskKind::read, bytes,
                  static_cast<uint32_t>(ch.occupancy()));
  dispatch(fn_id, large);
}

void Daemon::enqueue_warmup(uint64_t fn_id, VirtualTime now) {
  FnState& f = fn(fn_id);
  if (f.warmup_pending) return;
  f.warmup_pending = true;
  auto task = std::make_unique<Task>();
  task->kind = TaskKind::warmup;
  task->created = now;
  f.small_q.waiting.push_back(std::move(task));
  log_queue_event(now, fn_id, false, QueueEvent::enqueue, TaskKind::warmup, 0,
                  static_cast<uint32_t>(f.small_q.occupancy()));
  dispatch(fn_id, false);
}

void Daemon::dispatch(uint64_t fn_id, bool large) {
  FnState& f = fn(fn_id);
  Channel& ch = large ? f.large_q : f.small_q;
  if (ch.in_flight || ch.waiting.empty()) return;
  if (f.removed || platform_->is_retired(fn_id)) return;
  ch.in_flight = true;
  VirtualTime start = std::max(engine_->now(), platform_->ready_at(fn_id));
  engine_->schedule(start, [this, fn_id, large]() { run_task(fn_id, large, engine_->now()); });
}

void Daemon::run_task(uint64_t fn_id, bool large, VirtualTime start) {
  FnState& f = fn(fn_id);
  Channel& ch = large ? f.large_q : f.small_q;
  if (f.removed || platform_->is_retired(fn_id) || ch.waiting.empty()) {
    ch.in_flight = false;
    return;
  }
  std::shared_ptr<Task> task = std::move(ch.waiting.front());
  ch.waiting.pop_front();
  log_queue_event(start, fn_id, large, QueueEvent::start, task->kind, task->bytes,
                  static_cast<uint32_t>(ch.occupancy()));

  LogHead expected = f.head;
  auto mem_of = [](InvocationContext& ctx) { return static_cast<FunctionMemory*>(ctx.memory); };

  FnOpResult res;
  FunctionMemory::ReadOutcome read_out;
  CostCategory cat = task->kind == TaskKind::warmup ? CostCategory::warmup : CostCategory::io;
  const char* cause = task->kind == TaskKind::store  ? "store"
                      : task->kind == TaskKind::read ? "read"
                                                     : "warmup";

  InvokeResult ir = platform_->invoke(
      fn_id, start, cat, cause, [&](InvocationContext& ctx) -> VirtualDuration {
        FunctionMemory* mem = mem_of(ctx);
        switch (task->kind) {
          case TaskKind::store: {
            std::vector<StoreChunkItem> items;
            items.reserve(task->stores.size());
            for (const auto& s : task->stores) items.push_back(s.item);
            res = mem->store_chunks(items, expected, *cos_, ctx.started_at);
            return res.exec;
          }
          case TaskKind::read:
            read_out = mem->read_chunk(task->read_ref, expected, ctx.started_at);
            res = read_out.op;
            return res.exec;
          case TaskKind::warmup:
            res = mem->warmup(expected);
            return res.exec;
        }
        return 0;
      });

  engine_->schedule(ir.completed_at, [this, fn_id, large, task, res, read_out]() mutable {
    VirtualTime now = engine_->now();
    FnState& f2 = fn(fn_id);
    Channel& ch2 = large ? f2.large_q : f2.small_q;
    ch2.in_flight = false;
    log_queue_event(now, fn_id, large, QueueEvent::complete, task->kind, task->bytes,
                    static_cast<uint32_t>(ch2.occupancy()));

    on_op_result(fn_id, res, now);
    switch (task->kind) {
      case TaskKind::store:
        for (size_t i = 0; i < task->stores.size(); i++) {
          if (task->stores[i].done) {
            task->stores[i].done(res, i < res.stored.size() ? res.stored[i] : Blob());
          }
        }
        break;
      case TaskKind::read:
        task->read_done(std::move(read_out));
        break;
      case TaskKind::warmup:
        f2.warmup_pending = false;
        counters_.warmup_pings++;
        break;
    }
    dispatch(fn_id, large);
  });
}

void Daemon::on_op_result(uint64_t fn_id, const FnOpResult& res, VirtualTime completed) {
  FnState& f = fn(fn_id);
  f.last_activity = completed;
  if (res.head.term > f.head.term) f.head = res.head;
  if (res.consistency_failed) {
    handle_failure_signal(fn_id, res.consistency_diff, completed);
  }
}

// -------------------------------------------------------------------- PUT

void Daemon::submit_put(const ObjectKey& key, Blob payload, PutCallback cb) {
  engine_->schedule(engine_->now(), [this, key, payload = std::move(payload),
                                     cb = std::move(cb)]() mutable {
    do_put(key, std::move(payload), std::move(cb));
  });
}

void Daemon::do_put(const ObjectKey& key, Blob payload, PutCallback cb) {
  VirtualTime now = engine_->now();
  maybe_rotate(now);
  counters_.puts++;

  PutAck ack;
  ack.key = key;
  ack.submitted_at = now;
  if (payload.empty()) {
    ack.error = "empty payload";
    cb(std::move(ack));
    return;
  }

  std::vector<Blob> pieces = split_large(payload, cfg_.bounds);

  struct PutOp {
    PutAck ack;
    PutCallback cb;
    size_t remaining = 0;
    bool failed = false;
  };
  auto op = std::make_shared<PutOp>();
  op->ack = std::move(ack);
  op->cb = std::move(cb);

  struct PlacedChunk {
    ChunkRef ref;
    Blob payload;
    uint64_t target;
  };
  std::vector<PlacedChunk> placed;
  try {
    for (uint32_t q = 0; q < pieces.size(); q++) {
      std::vector<Blob> chunks = ec_encode(pieces[q], cfg_.ec);
      for (uint32_t c = 0; c < chunks.size(); c++) {
        ChunkRef ref{key, q, c};
        uint32_t rejections = 0;
        bool scaled = false;
        uint64_t target =
            place_chunk(c, chunks[c].size(), now, &rejections, &scaled);
        placements_.push_back({now, ref, chunks[c].size(), target, fns_.at(target).group,
                               bucket_of_group(fns_.at(target).group), rejections, scaled});
        placed.push_back({ref, chunks[c], target});
      }
    }
  } catch (const StoreError& e) {
    op->ack.error = e.what();
    op->cb(std::move(op->ack));
    return;
  }

  // Placement succeeded for every chunk: commit the object.
  objects_[key] = ObjectMeta{payload.size(), static_cast<uint32_t>(pieces.size())};
  for (const auto& pc : placed) {
    mapping_[pc.ref] = MappingEntry{pc.target, {}, pc.payload.size()};
  }

  op->remaining = placed.size();
  op->ack.pieces = static_cast<uint32_t>(pieces.size());
  op->ack.chunks = static_cast<uint32_t>(placed.size());

  for (auto& pc : placed) {
    StoreItemCtx ctx;
    ctx.item.ref = pc.ref;
    ctx.item.payload = pc.payload;
    ctx.item.persist = true;
    ctx.done = [this, op](const FnOpResult&, const Blob&) {
      op->remaining--;
      if (op->remaining == 0) {
        op->ack.ok = !op->failed;
        op->ack.completed_at = engine_->now();
        op->cb(std::move(op->ack));
      }
    };
    enqueue_store(pc.target, std::move(ctx), now);
  }
}

// -------------------------------------------------------------------- GET

void Daemon::submit_get(const ObjectKey& key, GetCallback cb) {
  engine_->schedule(engine_->now(),
                    [this, key, cb = std::move(cb)]() mutable { do_get(key, std::move(cb)); });
}

void Daemon::do_get(const ObjectKey& key, GetCallback cb) {
  VirtualTime now = engine_->now();
  maybe_rotate(now);
  counters_.gets++;

  GetResult result;
  result.key = key;
  result.submitted_at = now;

  auto meta_it = objects_.find(key);
  if (meta_it == objects_.end()) {
    result.error = "not found";
    cb(std::move(result));
    return;
  }
  const ObjectMeta meta = meta_it->second;

  struct GetOp {
    GetResult result;
    GetCallback cb;
    ObjectMeta meta;
    LargeObjectBounds bounds;
    ECConfig ec;
    std::vector<Blob> piece_data;
    uint32_t pieces_done = 0;
    uint32_t next_piece = 0;
    bool failed = false;
  };
  auto op = std::make_shared<GetOp>();
  op->result = std::move(result);
  op->cb = std::move(cb);
  op->meta = meta;
  op->bounds = cfg_.bounds;
  op->ec = cfg_.ec;
  op->piece_data.resize(meta.pieces);

  auto finish = [this, op]() {
    if (op->failed) {
      op->result.completed_at = engine_->now();
      op->cb(std::move(op->result));
      return;
    }
    uint64_t total = 0;
    for (const auto& p : op->piece_data) total += p.size();
    std::vector<uint8_t> out(total);
    uint64_t off = 0;
    for (const auto& p : op->piece_data) {
      std::memcpy(out.data() + off, p.data(), p.size());
      off += p.size();
    }
    op->result.ok = true;
    op->result.payload = Blob::take(std::move(out));
    op->result.completed_at = engine_->now();
    op->cb(std::move(op->result));
  };

  // Piece q size under the split policy.
  auto piece_size = [op](uint32_t q) -> uint64_t {
    if (op->meta.pieces == 1) return op->meta.size;
    if (q + 1 < op->meta.pieces) return op->bounds.lower_bound;
    return op->meta.size - static_cast<uint64_t>(op->meta.pieces - 1) * op->bounds.lower_bound;
  };

  // Forward declaration trick: keep the launcher alive in a shared holder.
  auto launch_piece = std::make_shared<std::function<void(uint32_t)>>();
  *launch_piece = [this, op, piece_size, finish, launch_piece](uint32_t q) {
    struct PieceCtx {
      std::vector<std::pair<uint32_t, Blob>> got;
      std::set<uint32_t> seen;
      uint32_t failures = 0;
      bool done = false;
    };
    auto pc = std::make_shared<PieceCtx>();
    uint64_t psize = piece_size(q);
    uint32_t O = op->ec.total();

    for (uint32_t c = 0; c < O; c++) {
      ChunkRef ref{op->result.key, q, c};
      auto rctx = std::make_shared<ReadCtx>();
      rctx->ref = ref;
      rctx->done = [this, op, pc, q, c, psize, finish, launch_piece](
                       Blob blob, bool ok, const std::string& err) {
        if (pc->done) return;  // straggler past the d-th arrival
        if (!ok) {
          pc->failures++;
          if (pc->failures > op->ec.total() - op->ec.d && !op->failed) {
            op->failed = true;
            op->result.error = "piece " + std::to_string(q) + " unreadable: " + err;
            pc->done = true;
            finish();
          }
          return;
        }
        if (!pc->seen.insert(c).second) return;
        pc->got.emplace_back(c, std::move(blob));
        if (pc->got.size() < op->ec.d) return;
        pc->done = true;
        op->piece_data[q] = ec_decode(pc->got, op->ec, psize);
        op->pieces_done++;
        if (op->next_piece < op->meta.pieces) {
          uint32_t nq = op->next_piece++;
          (*launch_piece)(nq);
        } else if (op->pieces_done == op->meta.pieces) {
          finish();
        }
      };
      read_chunk_logical(ref, rctx, engine_->now());
    }
  };

  uint32_t first_wave =
      std::min<uint32_t>(cfg_.daemon.piece_parallelism, op->meta.pieces);
  op->next_piece = first_wave;
  for (uint32_t q = 0; q < first_wave; q++) (*launch_piece)(q);
}

// ------------------------------------------------------------- chunk reads

void Daemon::read_chunk_logical(const ChunkRef& ref, ReadCtxPtr ctx, VirtualTime now) {
  counters_.chunk_reads++;
  auto mit = mapping_.find(ref);
  if (mit != mapping_.end()) ctx->size = mit->second.size;

  // Chunks being migrated are held back until the new owner has them.
  auto inflight = migration_inflight_.find(ref);
  if (inflight != migration_inflight_.end()) {
    ctx->waited = true;
    inflight->second.emplace_back(ctx, now);
    return;
  }
  serve_read_attempt(ref, ctx, now);
}

void Daemon::deliver_chunk(const ReadCtxPtr& ctx, const Blob& payload, VirtualTime now) {
  hits_.record(!ctx->waited);
  auto mit = mapping_.find(ctx->ref);
  if (mit != mapping_.end()) {
    auto fit = fns_.find(mit->second.storage_owner);
    if (fit != fns_.end() && !fit->second.removed && !fit->second.helper &&
        bucket_state(bucket_of_group(fit->second.group)) == BucketState::degraded) {
      consider_lazy_migration(ctx->ref.key, now);
    }
  }
  ctx->done(payload, true, "");
}

void Daemon::serve_read_attempt(const ChunkRef& ref, ReadCtxPtr ctx, VirtualTime now) {
  auto mit = mapping_.find(ref);
  if (mit == mapping_.end()) {
    ctx->done(Blob(), false, "unknown chunk");
    return;
  }
  MappingEntry& entry = mit->second;

  // Holders able to serve right now: live cache copies plus the storage
  // owner (a recovering owner only serves chunks written after detection).
  std::vector<uint64_t> candidates;
  for (uint64_t id : entry.cache_owners) {
    auto fit = fns_.find(id);
    if (fit == fns_.end()) continue;
    const FnState& f = fit->second;
    if (fn_serving(f) && !f.recovering) candidates.push_back(id);
  }
  auto oit = fns_.find(entry.storage_owner);
  const FnState* owner = oit == fns_.end() ? nullptr : &oit->second;
  if (owner && fn_serving(*owner)) {
    if (!owner->recovering) {
      candidates.push_back(owner->id);
    } else if (recovering_.at(owner->id)->fresh_refs.count(ref)) {
      candidates.push_back(owner->id);
    }
  }

  if (candidates.empty()) {
    if (!owner || !fn_serving(*owner)) {
      // Owner is gone for good: pull the chunk out of the object store onto
      // a live function, queueing this reader behind the move.
      ctx->waited = true;
      auto inflight = migration_inflight_.find(ref);
      if (inflight != migration_inflight_.end()) {
        inflight->second.emplace_back(ctx, now);
      } else {
        start_ondemand_migration(ref, ctx, now);
      }
      return;
    }
    // Owner alive but mid-recovery: park the read on the recovery plan.
    route_blocked_read(*recovering_.at(owner->id), ref, ctx);
    return;
  }

  uint64_t chosen = candidates[0];
  size_t chosen_occ = SIZE_MAX;
  for (uint64_t id : candidates) {
    size_t occ = channel_for(fns_.at(id), ctx->size).occupancy();
    if (occ < chosen_occ || (occ == chosen_occ && id < chosen)) {
      chosen = id;
      chosen_occ = occ;
    }
  }

  if (chosen_occ >= cfg_.daemon.queue_capacity && cfg_.daemon.demand_cache) {
    // Every holder is saturated: spread the chunk to an idle function.
    if (auto target = demand_cache_candidate(ref, now)) {
      start_demand_cache_load(ref, *target, ctx, now);
      return;
    }
  }

  enqueue_read(chosen, ref, ctx->size,
               [this, ref, ctx, chosen](FunctionMemory::ReadOutcome out) {
                 VirtualTime at = engine_->now();
                 if (out.payload) {
                   deliver_chunk(ctx, *out.payload, at);
                 } else {
                   handle_absent(chosen, ref, ctx, at);
                 }
               },
               now);
}

void Daemon::handle_absent(uint64_t fn_id, const ChunkRef& ref, ReadCtxPtr ctx,
                           VirtualTime now) {
  auto mit = mapping_.find(ref);
  if (mit == mapping_.end()) {
    ctx->done(Blob(), false, "unknown chunk");
    return;
  }
  MappingEntry& entry = mit->second;

  auto cit = std::find(entry.cache_owners.begin(), entry.cache_owners.end(), fn_id);
  if (cit != entry.cache_owners.end()) {
    // Cache copy evicted or lost with the instance: forget it and retry.
    entry.cache_owners.erase(cit);
    serve_read_attempt(ref, ctx, now);
    return;
  }

  if (entry.storage_owner != fn_id) {
    // Stale route (mapping moved while the read was queued): just retry.
    serve_read_attempt(ref, ctx, now);
    return;
  }

  FnState& f = fn(fn_id);
  if (f.removed || platform_->is_retired(fn_id)) {
    serve_read_attempt(ref, ctx, now);  // re-routes to on-demand migration
    return;
  }

  // Storage owner answered but no longer holds the chunk. Usually the
  // consistency piggyback already kicked off recovery; if not (silent
  // loss), start one for the full logged history.
  if (!recovering_.count(fn_id)) {
    handle_failure_signal(fn_id, f.head.diff_rank, now);
  }
  auto rit = recovering_.find(fn_id);
  if (rit != recovering_.end()) {
    route_blocked_read(*rit->second, ref, ctx);
  } else {
    serve_read_attempt(ref, ctx, now);  // failure path removed the function
  }
}

// ------------------------------------------------------------- migrations

void Daemon::start_ondemand_migration(const ChunkRef& ref, ReadCtxPtr ctx, VirtualTime now) {
  counters_.ondemand_migrations++;
  migration_inflight_[ref].emplace_back(ctx, now);
  migrate_chunk(ref, now, [](const Blob&) {});
}

void Daemon::migrate_chunk(const ChunkRef& ref, VirtualTime now,
                           std::function<void(const Blob&)> on_done) {
  MappingEntry& entry = mapping_.at(ref);
  uint64_t target;
  uint32_t rejections = 0;
  bool scaled = false;
  try {
    target = place_chunk(ref.chunk_id, entry.size, now, &rejections, &scaled);
  } catch (const StoreError& e) {
    auto it = migration_inflight_.find(ref);
    if (it != migration_inflight_.end()) {
      for (auto& [wctx, at] : it->second) {
        (void)at;
        wctx->done(Blob(), false, std::string("migration failed: ") + e.what());
      }
      migration_inflight_.erase(it);
    }
    on_done(Blob());
    return;
  }
  placements_.push_back({now, ref, entry.size, target, fns_.at(target).group,
                         bucket_of_group(fns_.at(target).group), rejections, scaled});
  entry.storage_owner = target;  // reads stay parked until the copy lands

  StoreItemCtx sctx;
  sctx.item.ref = ref;
  sctx.item.fetch_from_cos = true;
  sctx.done = [this, ref, on_done = std::move(on_done)](const FnOpResult&,
                                                        const Blob& blob) mutable {
    VirtualTime at = engine_->now();
    if (blob.empty()) {
      migrate_chunk(ref, at, std::move(on_done));  // target vanished, replace
      return;
    }
    auto it = migration_inflight_.find(ref);
    if (it != migration_inflight_.end()) {
      auto waiters = std::move(it->second);
      migration_inflight_.erase(it);
      for (auto& [wctx, started] : waiters) {
        (void)started;
        deliver_chunk(wctx, blob, at);
      }
    }
    on_done(blob);
  };
  enqueue_store(target, std::move(sctx), now);
}

void Daemon::consider_lazy_migration(const ObjectKey& key, VirtualTime now) {
  if (!cfg_.daemon.elastic || lazy_inflight_.count(key)) return;
  std::vector<ChunkRef> refs;
  for (auto it = mapping_.lower_bound(ChunkRef{key, 0, 0});
       it != mapping_.end() && it->first.key == key; ++it) {
    if (migration_inflight_.count(it->first)) continue;
    auto fit = fns_.find(it->second.storage_owner);
    if (fit == fns_.end() || fit->second.removed || fit->second.helper) continue;
    if (bucket_state(bucket_of_group(fit->second.group)) != BucketState::degraded) continue;
    refs.push_back(it->first);
  }
  if (refs.empty()) return;
  lazy_inflight_.insert(key);
  lazy_remaining_[key] = std::move(refs);
  run_migration_round(key, now);
}

void Daemon::run_migration_round(const ObjectKey& key, VirtualTime started_at) {
  auto it = lazy_remaining_.find(key);
  if (it == lazy_remaining_.end()) {
    lazy_inflight_.erase(key);
    return;
  }
  VirtualTime now = engine_->now();

  // Drop refs that moved (or started moving) since the last round.
  std::vector<ChunkRef>& refs = it->second;
  refs.erase(std::remove_if(refs.begin(), refs.end(),
                            [this](const ChunkRef& r) {
                              if (migration_inflight_.count(r)) return true;
                              auto mit = mapping_.find(r);
                              if (mit == mapping_.end()) return true;
                              auto fit = fns_.find(mit->second.storage_owner);
                              if (fit == fns_.end()) return false;
                              if (fit->second.removed) return false;
                              return bucket_state(bucket_of_group(fit->second.group)) !=
                                     BucketState::degraded;
                            }),
             refs.end());
  if (refs.empty()) {
    lazy_remaining_.erase(it);
    lazy_inflight_.erase(key);
    return;
  }

  // Throttled rounds move half of what is left; once the deadline passes,
  // everything goes at once.
  size_t take = refs.size();
  if (now - started_at < cfg_.daemon.migration_max) {
    take = std::max<size_t>(1, (refs.size() + 1) / 2);
  }
  for (size_t i = 0; i < take; i++) {
    ChunkRef ref = refs[i];
    counters_.lazy_migrations++;
    migration_inflight_[ref];  // intercept reads from this instant
    migrate_chunk(ref, now, [](const Blob&) {});
  }
  refs.erase(refs.begin(), refs.begin() + take);
  if (refs.empty()) {
    lazy_remaining_.erase(key);
    lazy_inflight_.erase(key);
    return;
  }
  engine_->schedule_in(cfg_.daemon.migration_throttle,
                       [this, key, started_at]() { run_migration_round(key, started_at); });
}

// ----------------------------------------------------------- demand cache

std::optional<uint64_t> Daemon::demand_cache_candidate(const ChunkRef& ref, VirtualTime now) {
  const MappingEntry& entry = mapping_.at(ref);
  const uint32_t O = cfg_.ec.total();
  uint64_t ptr = ref.chunk_id;
  size_t probes_left = cfg_.daemon.elastic ? 0 : open_groups_.size();

  while (true) {
    if (ptr >= open_slots_.size()) {
      if (cfg_.daemon.elastic) {
        launch_group(now, /*count_as_scale_out=*/true);
        continue;
      }
      if (open_slots_.empty()) return std::nullopt;
      ptr %= open_slots_.size();
    }
    uint64_t cand = open_slots_[ptr];
    const FnState& f = fns_.at(cand);
    bool is_owner = cand == entry.storage_owner ||
                    std::find(entry.cache_owners.begin(), entry.cache_owners.end(), cand) !=
                        entry.cache_owners.end();
    if (!is_owner && fn_serving(f) && !f.recovering && !queue_full(f, entry.size)) {
      return cand;
    }
    ptr += O;
    if (!cfg_.daemon.elastic && --probes_left == 0) return std::nullopt;
  }
}

void Daemon::start_demand_cache_load(const ChunkRef& ref, uint64_t target, ReadCtxPtr ctx,
                                     VirtualTime now) {
  counters_.demand_cache_loads++;
  ctx->waited = true;
  mapping_.at(ref).cache_owners.push_back(target);

  StoreItemCtx sctx;
  sctx.item.ref = ref;
  sctx.item.fetch_from_cos = true;
  sctx.item.cache = true;
  sctx.done = [this, ref, target, ctx](const FnOpResult&, const Blob& blob) {
    VirtualTime at = engine_->now();
    if (blob.empty()) {
      // Load fell through (target removed or chunk gone): forget the copy
      // and take the normal path.
      auto& owners = mapping_.at(ref).cache_owners;
      auto cit = std::find(owners.begin(), owners.end(), target);
      if (cit != owners.end()) owners.erase(cit);
      serve_read_attempt(ref, ctx, at);
      return;
    }
    deliver_chunk(ctx, blob, at);
  };
  enqueue_store(target, std::move(sctx), now);
}

// ----------------------------------------------------------------- recovery

void Daemon::handle_failure_signal(uint64_t fn_id, uint64_t diff, VirtualTime now) {
  FnState& f = fn(fn_id);
  if (f.removed || platform_->is_retired(fn_id) || f.helper) return;
  counters_.failures_detected++;

  auto rit = recovering_.find(fn_id);
  if (rit != recovering_.end()) {
    auto rec = rit->second;
    if (platform_->generation(fn_id) == rec->generation) return;  // same incident
    // Lost again mid-recovery: restart from the log, carrying the readers.
    recovery_reports_[rec->report_index].restarted = true;
    release_engagements(*rec, now);
    std::vector<std::pair<ChunkRef, ReadCtxPtr>> carried = std::move(rec->waiters);
    for (auto& sw : rec->shard_waiters) {
      for (auto& w : sw) carried.push_back(std::move(w));
    }
    recovering_.erase(rit);
    f.recovering = false;
    start_recovery(fn_id, diff, now, std::move(carried));
    return;
  }

  if (!f.helper &&
      bucket_state(bucket_of_group(f.group)) == BucketState::degraded) {
    // Failures in the demotion window are not worth replaying: the data is
    // durable in the object store and moves on access.
    remove_function(fn_id, now);
    return;
  }
  start_recovery(fn_id, diff, now, {});
}

void Daemon::start_recovery(uint64_t fn_id, uint64_t diff, VirtualTime now,
                            std::vector<std::pair<ChunkRef, ReadCtxPtr>> carried_waiters) {
  FnState& f = fn(fn_id);
  platform_->ensure_instance(fn_id);

  VirtualDuration build_lat = 0;
  Manifest mf = build_manifest(*cos_, fn_id, now, &build_lat);
  if (mf.head.term > f.head.term) f.head = mf.head;

  auto rec = std::make_shared<RecoveryState>();
  rec->epoch = next_epoch_++;
  rec->fn = fn_id;
  rec->generation = platform_->generation(fn_id);
  rec->detected_at = now;
  rec->manifest = std::move(mf);
  rec->mode = RecoveryMode::local_only;
  if (cfg_.daemon.parallel_recovery && !rec->manifest.ops.empty() &&
      recovery_decision(diff, cfg_.daemon.recovery_group, cfg_.daemon.recovery_k) ==
          RecoveryMode::parallel) {
    rec->mode = RecoveryMode::parallel;
  }
  f.recovering = true;
  f.recovery_epoch = rec->epoch;

  // Writes already queued will run on the live instance during the replay;
  // reads for them are served directly instead of blocking.
  auto scan = [&](const Channel& ch) {
    for (const auto& t : ch.waiting) {
      if (t->kind != TaskKind::store) continue;
      for (const auto& s : t->stores) rec->fresh_refs.insert(s.item.ref);
    }
  };
  scan(f.small_q);
  scan(f.large_q);

  rec->report_index = recovery_reports_.size();
  RecoveryReport report;
  report.fn = fn_id;
  report.epoch = rec->epoch;
  report.detected_at = now;
  report.diff = diff;
  report.mode = rec->mode;
  report.manifest_ops = rec->manifest.ops.size();
  report.manifest_bytes = rec->manifest.chunk_bytes;
  recovery_reports_.push_back(report);
  recovering_[fn_id] = rec;

  // Order matters: helper fetches are scheduled before the local replay so
  // the parallel phase lands first when both would finish together.
  if (rec->mode == RecoveryMode::parallel) setup_parallel(*rec, now);

  VirtualDuration replay = build_lat;
  for (const auto& op : rec->manifest.ops) {
    if (op.kind == LogRecordKind::evict) continue;
    replay += cos_->transfer_latency(op.size) +
              static_cast<VirtualDuration>(static_cast<__int128>(op.size) * kSecond /
                                           cfg_.daemon.exec_bytes_per_sec);
  }
  uint64_t epoch = rec->epoch;
  engine_->schedule(now + replay,
                    [this, fn_id, epoch]() { finish_local_replay(fn_id, epoch, engine_->now()); });

  for (auto& [ref, ctx] : carried_waiters) route_blocked_read(*rec, ref, ctx);
  sample_now();
}

void Daemon::route_blocked_read(RecoveryState& rec, const ChunkRef& ref, ReadCtxPtr ctx) {
  VirtualTime now = engine_->now();
  if (rec.fresh_refs.count(ref)) {
    // Re-written after the failure: the live instance has it.
    resume_waiter_on(rec.fn, ref, ctx, now);
    return;
  }
  RecoveryReport& report = recovery_reports_[rec.report_index];
  if (rec.parallel_active) {
    uint32_t s = shard_of(ref, static_cast<uint32_t>(rec.helpers.size()));
    RecoveryState::Helper& h = rec.helpers[s];
    if (h.ready) {
      report.rerouted_reads++;
      resume_waiter_on(h.id, ref, ctx, now);
      return;
    }
    report.blocked_reads++;
    ctx->waited = true;
    rec.shard_waiters[s].emplace_back(ref, ctx);
    return;
  }
  report.blocked_reads++;
  ctx->waited = true;
  rec.waiters.emplace_back(ref, ctx);
}

void Daemon::resume_waiter_on(uint64_t target_fn, const ChunkRef& ref, ReadCtxPtr ctx,
                              VirtualTime now) {
  enqueue_read(target_fn, ref, ctx->size,
               [this, ref, ctx](FunctionMemory::ReadOutcome out) {
                 VirtualTime at = engine_->now();
                 if (out.payload) {
                   deliver_chunk(ctx, *out.payload, at);
                   return;
                 }
                 // Shard copies can be skipped (memory pressure) or dropped;
                 // fall back to the owner's recovery, or retry if it is done.
                 auto mit = mapping_.find(ref);
                 if (mit != mapping_.end()) {
                   auto rit = recovering_.find(mit->second.storage_owner);
                   if (rit != recovering_.end()) {
                     RecoveryState& rec = *rit->second;
                     recovery_reports_[rec.report_index].blocked_reads++;
                     ctx->waited = true;
                     rec.waiters.emplace_back(ref, ctx);
                     return;
                   }
                 }
                 serve_read_attempt(ref, ctx, at);
               },
               now);
}

void Daemon::setup_parallel(RecoveryState& rec, VirtualTime now) {
  const uint32_t g = cfg_.daemon.recovery_group;
  RecoveryReport& report = recovery_reports_[rec.report_index];
  report.group_size = g;

  // Net chunk set after the replay: later puts win, evictions remove.
  std::map<ChunkRef, const ManifestOp*> net;
  for (const auto& op : rec.manifest.ops) {
    if (op.kind == LogRecordKind::evict) {
      net.erase(op.ref);
    } else {
      net[op.ref] = &op;
    }
  }

  rec.helpers.assign(g, RecoveryState::Helper{});
  rec.shard_waiters.assign(g, {});
  for (const auto& [ref, op] : net) {
    RecoveryState::Helper& h = rec.helpers[shard_of(ref, g)];
    h.ops.push_back(*op);
    h.bytes += op->size;
  }

  // Staff the shards: preassigned helpers, then any eligible function in a
  // shuffled order, then fresh deployments.
  const FnState& owner = fn(rec.fn);
  std::vector<uint64_t> pool;
  for (uint64_t id : owner.preassigned_helpers) pool.push_back(id);
  std::vector<uint64_t> rest;
  for (const auto& [id, f] : fns_) {
    if (std::find(owner.preassigned_helpers.begin(), owner.preassigned_helpers.end(), id) ==
        owner.preassigned_helpers.end()) {
      rest.push_back(id);
    }
  }
  for (size_t i = 0; i + 1 < rest.size(); i++) {
    size_t j = i + rng_.bounded(rest.size() - i);
    std::swap(rest[i], rest[j]);
  }
  pool.insert(pool.end(), rest.begin(), rest.end());

  auto eligible = [&](uint64_t id) {
    if (id == rec.fn || engaged_helpers_.count(id)) return false;
    auto it = fns_.find(id);
    if (it == fns_.end()) return false;
    const FnState& f = it->second;
    return !f.removed && !f.recovering && !platform_->is_retired(id);
  };

  size_t pool_next = 0;
  bool staffed_all = true;
  for (uint32_t s = 0; s < g; s++) {
    RecoveryState::Helper& h = rec.helpers[s];
    uint64_t id = 0;
    bool found = false;
    while (pool_next < pool.size()) {
      uint64_t cand = pool[pool_next++];
      if (eligible(cand)) {
        id = cand;
        found = true;
        break;
      }
    }
    if (!found) {
      try {
        id = platform_->deploy(now);
      } catch (const ScaleOutError&) {
        staffed_all = false;
        break;
      }
      register_function(id, 0, 0, /*helper=*/true, now);
      report.helpers_deployed++;
      found = true;
    }
    h.id = id;
    engaged_helpers_.insert(id);
    platform_->ensure_instance(id);
    h.generation = platform_->generation(id);
    if (h.ops.empty()) {
      h.ready = true;
      continue;
    }
    h.fetch_dur = 0;
    for (const auto& op : h.ops) h.fetch_dur += cos_->transfer_latency(op.size);
    h.fetch_dur += static_cast<VirtualDuration>(static_cast<__int128>(h.bytes) * kSecond /
                                                cfg_.daemon.exec_bytes_per_sec);
    rec.helpers_pending++;
  }

  if (!staffed_all) {
    // Could not field a full group (deployment cap): skip the parallel
    // phase entirely rather than serve a partial shard map.
    for (auto& h : rec.helpers) {
      if (h.id != 0) engaged_helpers_.erase(h.id);
    }
    rec.helpers.clear();
    rec.shard_waiters.clear();
    rec.helpers_pending = 0;
    rec.parallel_active = false;
    rec.mode = RecoveryMode::local_only;
    report.mode = RecoveryMode::local_only;
    report.parallel_aborted = true;
    return;
  }

  rec.parallel_active = true;
  if (rec.helpers_pending == 0) {
    report.parallel_done_at = now;
    return;
  }
  auto self = recovering_.at(rec.fn);
  for (uint32_t s = 0; s < g; s++) {
    if (!rec.helpers[s].ready) schedule_helper_fetch(self, s, now);
  }
}

void Daemon::schedule_helper_fetch(const std::shared_ptr<RecoveryState>& rec, uint32_t shard,
                                   VirtualTime now) {
  uint64_t fn_id = rec->fn;
  uint64_t epoch = rec->epoch;
  engine_->schedule(now + rec->helpers[shard].fetch_dur, [this, fn_id, epoch, shard]() {
    helper_fetch_done(fn_id, epoch, shard, engine_->now());
  });
}

void Daemon::helper_fetch_done(uint64_t fn_id, uint64_t epoch, uint32_t shard,
                               VirtualTime now) {
  auto rit = recovering_.find(fn_id);
  if (rit == recovering_.end()) return;
  auto rec = rit->second;
  if (rec->epoch != epoch || !rec->parallel_active) return;
  RecoveryState::Helper& h = rec->helpers[shard];
  RecoveryReport& report = recovery_reports_[rec->report_index];

  bool lost = platform_->is_retired(h.id) || fns_.at(h.id).removed ||
              platform_->generation(h.id) != h.generation ||
              platform_->instance_memory(h.id) == nullptr;
  if (lost) {
    rec->replacements++;
    report.replacements++;
    if (rec->replacements > cfg_.daemon.recovery_replacement_cap) {
      abort_parallel(*rec);
      return;
    }
    uint32_t fresh = 0;
    auto next = pick_one_helper(*rec, now, &fresh);
    if (!next) {
      abort_parallel(*rec);
      return;
    }
    report.helpers_deployed += fresh;
    engaged_helpers_.erase(h.id);
    h.id = *next;
    engaged_helpers_.insert(h.id);
    platform_->ensure_instance(h.id);
    h.generation = platform_->generation(h.id);
    schedule_helper_fetch(rec, shard, now);
    return;
  }

  auto* mem = static_cast<FunctionMemory*>(platform_->instance_memory(h.id));
  mem->load_shard(h.ops, *cos_, now);
  platform_->charge_background(h.id, now - h.fetch_dur, h.fetch_dur, CostCategory::recovery,
                               "shard-fetch");
  h.ready = true;
  rec->helpers_pending--;

  auto waiters = std::move(rec->shard_waiters[shard]);
  rec->shard_waiters[shard].clear();
  for (auto& [ref, ctx] : waiters) {
    report.rerouted_reads++;
    resume_waiter_on(h.id, ref, ctx, now);
  }

  if (rec->helpers_pending == 0) {
    report.parallel_done_at = now;
    sample_now();
  }
}

std::optional<uint64_t> Daemon::pick_one_helper(const RecoveryState& rec, VirtualTime now,
                                                uint32_t* freshly_deployed) {
  std::vector<uint64_t> eligible;
  for (const auto& [id, f] : fns_) {
    if (id == rec.fn || f.removed || f.recovering) continue;
    if (engaged_helpers_.count(id) || platform_->is_retired(id)) continue;
    eligible.push_back(id);
  }
  if (!eligible.empty()) return eligible[rng_.bounded(eligible.size())];
  try {
    uint64_t id = platform_->deploy(now);
    register_function(id, 0, 0, /*helper=*/true, now);
    if (freshly_deployed) (*freshly_deployed)++;
    return id;
  } catch (const ScaleOutError&) {
    return std::nullopt;
  }
}

void Daemon::abort_parallel(RecoveryState& rec) {
  RecoveryReport& report = recovery_reports_[rec.report_index];
  report.parallel_aborted = true;
  rec.parallel_active = false;
  for (auto& h : rec.helpers) {
    if (h.id == 0) continue;
    engaged_helpers_.erase(h.id);
    if (h.ready && platform_->generation(h.id) == h.generation) {
      if (auto* mem = platform_->instance_memory(h.id)) {
        static_cast<FunctionMemory*>(mem)->drop_shards();
      }
    }
  }
  for (auto& sw : rec.shard_waiters) {
    for (auto& w : sw) rec.waiters.push_back(std::move(w));
    sw.clear();
  }
}

void Daemon::release_engagements(RecoveryState& rec, VirtualTime) {
  if (!rec.parallel_active && rec.helpers.empty()) return;
  for (auto& h : rec.helpers) {
    if (h.id != 0) engaged_helpers_.erase(h.id);
  }
}

void Daemon::finish_local_replay(uint64_t fn_id, uint64_t epoch, VirtualTime now) {
  auto rit = recovering_.find(fn_id);
  if (rit == recovering_.end()) return;
  auto rec = rit->second;
  if (rec->epoch != epoch) return;
  FnState& f = fn(fn_id);
  if (f.removed || platform_->is_retired(fn_id)) return;
  RecoveryReport& report = recovery_reports_[rec->report_index];

  auto* raw = platform_->instance_memory(fn_id);
  if (raw == nullptr || platform_->generation(fn_id) != rec->generation) {
    // The instance died again during the replay and nothing has poked it
    // since: restart as a fresh incident.
    report.restarted = true;
    release_engagements(*rec, now);
    std::vector<std::pair<ChunkRef, ReadCtxPtr>> carried = std::move(rec->waiters);
    for (auto& sw : rec->shard_waiters) {
      for (auto& w : sw) carried.push_back(std::move(w));
    }
    recovering_.erase(rit);
    f.recovering = false;
    start_recovery(fn_id, f.head.diff_rank, now, std::move(carried));
    return;
  }

  auto* mem = static_cast<FunctionMemory*>(raw);
  FnOpResult res = mem->apply_manifest(rec->manifest, *cos_, now);
  platform_->charge_background(fn_id, rec->detected_at, now - rec->detected_at,
                               CostCategory::recovery, "local-replay");
  if (res.head.term > f.head.term) f.head = res.head;

  report.local_done_at = now;
  rec->local_done = true;
  f.recovering = false;

  // Everyone still parked resumes against the rebuilt memory. A miss here
  // means the log lost data: surface it, never mask it.
  std::vector<std::pair<ChunkRef, ReadCtxPtr>> waiters = std::move(rec->waiters);
  for (auto& sw : rec->shard_waiters) {
    for (auto& w : sw) waiters.push_back(std::move(w));
    sw.clear();
  }
  for (auto& [ref, ctx] : waiters) {
    enqueue_read(fn_id, ref, ctx->size,
                 [this, ref, ctx](FunctionMemory::ReadOutcome out) {
                   if (out.payload) {
                     deliver_chunk(ctx, *out.payload, engine_->now());
                   } else {
                     ctx->done(Blob(), false, "chunk missing after recovery");
                   }
                 },
                 now);
  }

  release_engagements(*rec, now);
  // Shard copies stick around briefly for stragglers, then get dropped.
  for (const auto& h : rec->helpers) {
    if (h.id == 0 || !h.ready) continue;
    uint64_t hid = h.id;
    uint64_t hgen = h.generation;
    engine_->schedule_in(cfg_.daemon.shard_retention,
                         [this, hid, hgen]() {
                           if (platform_->is_retired(hid)) return;
                           if (platform_->generation(hid) != hgen) return;
                           if (auto* m = platform_->instance_memory(hid)) {
                             static_cast<FunctionMemory*>(m)->drop_shards();
                           }
                         },
                         /*weak=*/true);
  }
  recovering_.erase(rit);
  sample_now();
}

// -------------------------------------------------------------- maintenance

void Daemon::warmup_sweep(VirtualTime now) {
  for (auto& [id, f] : fns_) {
    if (f.removed || f.helper || f.warmup_pending) continue;
    if (platform_->is_retired(id) || platform_->ready_at(id) > now) continue;
    if (f.small_q.occupancy() > 0 || f.large_q.occupancy() > 0) continue;
    VirtualDuration threshold =
        bucket_state(bucket_of_group(f.group)) == BucketState::degraded
            ? cfg_.daemon.warmup_degraded
            : cfg_.daemon.warmup_active;
    if (now - f.last_activity >= threshold) enqueue_warmup(id, now);
  }
}

void Daemon::sample_now() {
  FnSample s;
  s.at = engine_->now();
  s.deployments = 0;
  s.live_instances = 0;
  s.serving = 0;
  s.degraded = 0;
  s.recovering = static_cast<uint32_t>(recovering_.size());
  for (const auto& [id, f] : fns_) {
    if (f.removed) continue;
    s.deployments++;
    if (platform_->instance_memory(id) != nullptr) s.live_instances++;
    if (f.helper) continue;
    BucketState bs = bucket_state(bucket_of_group(f.group));
    if (bs == BucketState::degraded) {
      s.degraded++;
    } else if (bs != BucketState::retired) {
      s.serving++;
    }
  }
  samples_.push_back(s);
}

// ------------------------------------------------------------ introspection

std::vector<Daemon::FnInfo> Daemon::function_table() const {
  std::vector<FnInfo> out;
  out.reserve(fns_.size());
  for (const auto& [id, f] : fns_) {
    FnInfo info;
    info.id = id;
    info.bucket = f.helper ? -1 : bucket_of_group(f.group);
    info.group = f.group;
    info.slot = f.slot;
    info.removed = f.removed;
    info.recovering = f.recovering;
    info.admitted_bytes = f.admitted_bytes;
    info.head = f.head;
    out.push_back(info);
  }
  return out;
}

std::vector<Daemon::MappingRow> Daemon::mapping_table() const {
  std::vector<MappingRow> out;
  out.reserve(mapping_.size());
  for (const auto& [ref, entry] : mapping_) {
    out.push_back({ref, entry.storage_owner, entry.cache_owners, entry.size});
  }
  return out;
}

std::map<int64_t, BucketState> Daemon::bucket_table() const {
  std::map<int64_t, BucketState> out;
  for (const auto& [idx, b] : buckets_) out[idx] = b.state;
  return out;
}

}  // namespace smstore
