#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "smstore/cluster.hpp"
#include "smstore/replay.hpp"

using namespace smstore;

namespace {

SystemConfig recovery_cfg() {
  SystemConfig cfg;
  cfg.seed = 11;
  cfg.ec.d = 2;
  cfg.ec.p = 1;
  cfg.faas.memory_limit = 64ull << 20;
  cfg.daemon.queue_capacity = 64;
  cfg.daemon.snapshot_every = 2;
  return cfg;
}

uint64_t pick_victim(const Daemon& d) {
  uint64_t victim = 0, best = 0;
  for (const auto& info : d.function_table()) {
    if (info.removed || info.bucket < 0) continue;
    if (info.admitted_bytes > best) {
      best = info.admitted_bytes;
      victim = info.id;
    }
  }
  return victim;
}

std::string key_owned_by(const Daemon& d, uint64_t fn) {
  for (const auto& row : d.mapping_table()) {
    if (row.storage_owner == fn) return row.ref.key.name();
  }
  return {};
}

const RecoveryReport* report_for(const Daemon& d, uint64_t fn) {
  for (const auto& r : d.recovery_reports()) {
    if (r.fn == fn) return &r;
  }
  return nullptr;
}

void put_all(Cluster& cl, const std::string& prefix, int n, uint64_t size) {
  for (int i = 0; i < n; i++) {
    std::string key = prefix + std::to_string(i);
    REQUIRE(cl.client().put_sync(ObjectKey(key), make_payload(ObjectKey(key), size)).ok);
  }
}

void check_all(Cluster& cl, const std::string& prefix, int n, uint64_t size) {
  for (int i = 0; i < n; i++) {
    std::string key = prefix + std::to_string(i);
    GetResult res = cl.client().get_sync(ObjectKey(key));
    REQUIRE(res.ok);
    CHECK(res.payload == make_payload(ObjectKey(key), size));
  }
}

}  // namespace

TEST_CASE("instance loss below the parallel threshold replays locally") {
  SystemConfig cfg = recovery_cfg();
  cfg.daemon.recovery_group = 20;
  cfg.daemon.recovery_k = 2;  // parallel only past 40 lost entries
  Cluster cl(cfg);
  cl.start();

  put_all(cl, "obj-", 12, 64 << 10);
  uint64_t victim = pick_victim(cl.daemon());
  REQUIRE(victim != 0);
  std::string key = key_owned_by(cl.daemon(), victim);
  REQUIRE_FALSE(key.empty());

  REQUIRE(cl.platform().reclaim(victim));
  GetResult res = cl.client().get_sync(ObjectKey(key));
  REQUIRE(res.ok);
  CHECK(res.payload == make_payload(ObjectKey(key), 64 << 10));

  const Daemon& d = cl.daemon();
  CHECK(d.counters().failures_detected >= 1);
  const RecoveryReport* rep = report_for(d, victim);
  REQUIRE(rep != nullptr);
  CHECK(rep->mode == RecoveryMode::local_only);
  CHECK(rep->diff > 0);
  CHECK(rep->manifest_ops > 0);
  CHECK(rep->parallel_done_at == -1);
  CHECK(rep->local_done_at > rep->detected_at);
  CHECK(rep->blocked_reads >= 1);
  CHECK(rep->rerouted_reads == 0);

  // Everything is readable and correct after the replay.
  check_all(cl, "obj-", 12, 64 << 10);

  // The waited read shows up as a miss.
  HitStats hs = cl.total_hits();
  CHECK(hs.hits() < hs.total());
}

TEST_CASE("large loss recovers in parallel and reroutes parked reads") {
  SystemConfig cfg = recovery_cfg();
  cfg.daemon.recovery_group = 3;
  cfg.daemon.recovery_k = 0;  // any loss goes parallel
  cfg.daemon.shard_retention = 5 * kSecond;
  Cluster cl(cfg);
  cl.start();

  put_all(cl, "big-", 20, 256 << 10);
  uint64_t victim = pick_victim(cl.daemon());
  REQUIRE(victim != 0);
  std::string key = key_owned_by(cl.daemon(), victim);

  REQUIRE(cl.platform().reclaim(victim));
  GetResult res = cl.client().get_sync(ObjectKey(key));
  REQUIRE(res.ok);

  Daemon& d = cl.daemon();
  const RecoveryReport* rep = report_for(d, victim);
  REQUIRE(rep != nullptr);
  CHECK(rep->mode == RecoveryMode::parallel);
  CHECK(rep->group_size == 3);
  CHECK_FALSE(rep->parallel_aborted);
  REQUIRE(rep->parallel_done_at != -1);
  REQUIRE(rep->local_done_at != -1);
  CHECK(rep->parallel_done_at <= rep->local_done_at);
  CHECK(rep->blocked_reads >= 1);
  CHECK(rep->rerouted_reads >= 1);

  check_all(cl, "big-", 20, 256 << 10);

  // Helper shards stay resident for stragglers, then the retention timer
  // clears them.
  uint64_t shard_total = 0;
  for (const auto& info : d.function_table()) {
    if (auto* mem = cl.platform().instance_memory(info.id)) {
      shard_total += static_cast<FunctionMemory*>(mem)->shard_bytes();
    }
  }
  REQUIRE(shard_total > 0);
  cl.engine().run_until(cl.engine().now() + 6 * kSecond);
  for (const auto& info : d.function_table()) {
    if (auto* mem = cl.platform().instance_memory(info.id)) {
      CHECK(static_cast<FunctionMemory*>(mem)->shard_bytes() == 0);
    }
  }
}

TEST_CASE("a second loss mid-replay restarts recovery and still converges") {
  SystemConfig cfg = recovery_cfg();
  cfg.daemon.recovery_group = 3;
  cfg.daemon.recovery_k = 0;
  Cluster cl(cfg);
  cl.start();

  put_all(cl, "r-", 10, 2 << 20);
  uint64_t victim = pick_victim(cl.daemon());
  REQUIRE(victim != 0);
  std::string key = key_owned_by(cl.daemon(), victim);

  VirtualTime t0 = cl.engine().now();
  REQUIRE(cl.platform().reclaim(victim));
  bool got = false;
  cl.client().submit_get(ObjectKey(key), [&](GetResult res) {
    CHECK(res.ok);
    got = true;
  });

  // Past detection (cold start ~100 ms) but well inside the multi-hundred-ms
  // replay of ~10 MiB from the object store.
  cl.engine().run_until(t0 + 300 * kMillisecond);
  REQUIRE(report_for(cl.daemon(), victim) != nullptr);
  REQUIRE(cl.platform().reclaim(victim));
  cl.run_to_completion(kHour);
  CHECK(got);

  std::vector<const RecoveryReport*> reps;
  for (const auto& r : cl.daemon().recovery_reports()) {
    if (r.fn == victim) reps.push_back(&r);
  }
  REQUIRE(reps.size() >= 2);
  CHECK(reps.front()->restarted);
  CHECK_FALSE(reps.back()->restarted);
  CHECK(reps.back()->local_done_at != -1);

  check_all(cl, "r-", 10, 2 << 20);
}

TEST_CASE("parallel recovery disabled: reads block on the full local replay") {
  SystemConfig cfg = recovery_cfg();
  cfg.daemon.recovery_group = 3;
  cfg.daemon.recovery_k = 0;
  cfg.daemon.parallel_recovery = false;
  Cluster cl(cfg);
  cl.start();

  put_all(cl, "nr-", 20, 256 << 10);
  uint64_t victim = pick_victim(cl.daemon());
  std::string key = key_owned_by(cl.daemon(), victim);

  REQUIRE(cl.platform().reclaim(victim));
  REQUIRE(cl.client().get_sync(ObjectKey(key)).ok);

  const RecoveryReport* rep = report_for(cl.daemon(), victim);
  REQUIRE(rep != nullptr);
  CHECK(rep->mode == RecoveryMode::local_only);
  CHECK(rep->group_size == 0);
  CHECK(rep->parallel_done_at == -1);
  CHECK(rep->local_done_at != -1);
  CHECK(rep->blocked_reads >= 1);
  CHECK(rep->rerouted_reads == 0);

  check_all(cl, "nr-", 20, 256 << 10);
}

TEST_CASE("a helper lost mid-fetch is replaced and recovery completes") {
  SystemConfig cfg = recovery_cfg();
  cfg.ec.d = 1;
  cfg.ec.p = 1;  // one group of two functions
  cfg.daemon.recovery_group = 2;
  cfg.daemon.recovery_k = 0;
  Cluster cl(cfg);
  cl.start();

  put_all(cl, "h-", 4, 2 << 20);

  // Both members hold one chunk per object; victim is one, the other will
  // serve as a preassigned helper.
  std::vector<uint64_t> members;
  for (const auto& info : cl.daemon().function_table()) {
    if (!info.removed && info.bucket >= 0) members.push_back(info.id);
  }
  REQUIRE(members.size() == 2);
  uint64_t victim = pick_victim(cl.daemon());
  uint64_t other = members[0] == victim ? members[1] : members[0];
  std::string key = key_owned_by(cl.daemon(), victim);

  VirtualTime t0 = cl.engine().now();
  REQUIRE(cl.platform().reclaim(victim));
  bool got = false;
  cl.client().submit_get(ObjectKey(key), [&](GetResult res) {
    CHECK(res.ok);
    got = true;
  });

  // Detection lands around +100 ms; shard fetches of ~4 MiB take a few
  // hundred ms more. Kill the helper in that window.
  cl.engine().run_until(t0 + 200 * kMillisecond);
  REQUIRE(report_for(cl.daemon(), victim) != nullptr);
  cl.platform().reclaim(other);
  cl.run_to_completion(kHour);
  CHECK(got);

  const RecoveryReport* rep = report_for(cl.daemon(), victim);
  REQUIRE(rep != nullptr);
  CHECK(rep->mode == RecoveryMode::parallel);
  CHECK(rep->replacements >= 1);
  CHECK(rep->local_done_at != -1);

  check_all(cl, "h-", 4, 2 << 20);
}

TEST_CASE("failures in a degraded bucket drop the function; reads migrate") {
  SystemConfig cfg = recovery_cfg();
  cfg.faas.memory_limit = 1ull << 20;
  cfg.daemon.hardcap_fraction = 0.5;  // force sealed groups that age in place
  Cluster cl(cfg);
  cl.start();

  put_all(cl, "d-", 10, 300 << 10);
  REQUIRE_FALSE(cl.daemon().seal_log().empty());

  cl.engine().run_until(20 * kMinute);
  cl.daemon().maybe_rotate(cl.engine().now());
  REQUIRE(cl.daemon().bucket_table().at(0) == BucketState::degraded);

  // Pick a victim that still lives in the degraded bucket.
  uint64_t victim = 0;
  for (const auto& info : cl.daemon().function_table()) {
    if (!info.removed && info.bucket == 0 && info.admitted_bytes > 0) {
      victim = info.id;
      break;
    }
  }
  REQUIRE(victim != 0);
  std::string key = key_owned_by(cl.daemon(), victim);
  REQUIRE_FALSE(key.empty());

  size_t reports_before = cl.daemon().recovery_reports().size();
  REQUIRE(cl.platform().reclaim(victim));
  GetResult res = cl.client().get_sync(ObjectKey(key));
  REQUIRE(res.ok);
  CHECK(res.payload == make_payload(ObjectKey(key), 300 << 10));

  const Daemon& d = cl.daemon();
  CHECK(d.counters().failures_detected >= 1);
  // No replay for demotion-window data: the function is simply removed.
  CHECK(d.recovery_reports().size() == reports_before);
  // The access itself migrates the object's chunks out of the degraded
  // bucket; the blocked read rides that transfer instead of starting its own.
  CHECK(d.counters().lazy_migrations >= 1);
  bool removed = false;
  for (const auto& info : d.function_table()) {
    if (info.id == victim) removed = info.removed;
  }
  CHECK(removed);

  check_all(cl, "d-", 10, 300 << 10);
}
