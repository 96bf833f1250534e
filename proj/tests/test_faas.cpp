#include <doctest.h>

#include "smstore/faas.hpp"
#include "smstore/function_memory.hpp"

using namespace smstore;

namespace {

PlatformConfig small_cfg() {
  PlatformConfig cfg;
  cfg.memory_limit = 64ull << 20;
  return cfg;
}

struct Fixture {
  CostLedger ledger;
  StoreRuntime runtime{64ull << 20, 16, 75ull << 20};
  Platform platform;

  explicit Fixture(PlatformConfig cfg = small_cfg())
      : platform(cfg, &runtime, &ledger, Rng(42)) {}
};

VirtualDuration noop(InvocationContext&) { return 0; }

}  // namespace

TEST_CASE("deploy then invoke: readiness, cold/warm starts, generations") {
  Fixture fx;
  uint64_t id = fx.platform.deploy(0);
  CHECK(fx.platform.ready_at(id) == 50 * kMillisecond);
  CHECK_THROWS_AS(fx.platform.invoke(id, 0, CostCategory::io, "early", noop), StoreError);

  InvokeResult first = fx.platform.invoke(id, fx.platform.ready_at(id), CostCategory::io,
                                          "first", noop);
  CHECK(first.was_cold);
  CHECK(first.overhead == 100 * kMillisecond);
  CHECK(first.generation == 1);
  CHECK(first.completed_at == fx.platform.ready_at(id) + 100 * kMillisecond);

  InvokeResult second =
      fx.platform.invoke(id, first.completed_at, CostCategory::io, "second", noop);
  CHECK_FALSE(second.was_cold);
  CHECK(second.overhead == 5 * kMillisecond);
  CHECK(second.generation == 1);

  // reclaim wipes the instance; the next invocation is cold with a new
  // generation and fresh memory
  auto* mem = dynamic_cast<FunctionMemory*>(fx.platform.instance_memory(id));
  REQUIRE(mem != nullptr);
  CHECK(fx.platform.reclaim(id));
  CHECK(fx.platform.instance_memory(id) == nullptr);
  CHECK_FALSE(fx.platform.reclaim(id));  // already cold

  InvokeResult third =
      fx.platform.invoke(id, second.completed_at, CostCategory::io, "third", noop);
  CHECK(third.was_cold);
  CHECK(third.generation == 2);
}

TEST_CASE("billing: ceil-to-ms with a 1 ms floor, per-invocation fee") {
  Fixture fx;
  uint64_t id = fx.platform.deploy(0);
  VirtualTime t = fx.platform.ready_at(id);

  InvokeResult cold = fx.platform.invoke(id, t, CostCategory::io, "a", noop);
  // 100 ms cold start, zero exec -> exactly 100 billed ms
  CHECK(cold.billed_ms == 100);

  InvokeResult warm = fx.platform.invoke(id, cold.completed_at, CostCategory::io, "b",
                                         [](InvocationContext&) { return VirtualDuration(1); });
  // 5 ms warm start + 1 us exec -> ceil to 6 ms
  CHECK(warm.billed_ms == 6);

  Money expected = Money::from_pico(20000) + gb_second_charge(Money::from_pico(16666700),
                                                              64ull << 20, 100) +
                   Money::from_pico(20000) +
                   gb_second_charge(Money::from_pico(16666700), 64ull << 20, 6);
  CHECK(fx.ledger.total(CostCategory::io) == expected);

  // background transfers bill the same way without touching the instance
  uint64_t gen_before = fx.platform.generation(id);
  fx.platform.charge_background(id, warm.completed_at, 2500, CostCategory::recovery, "shard");
  CHECK(fx.platform.generation(id) == gen_before);
  Money rec = Money::from_pico(20000) +
              gb_second_charge(Money::from_pico(16666700), 64ull << 20, 3);
  CHECK(fx.ledger.total(CostCategory::recovery) == rec);
}

TEST_CASE("retire rejects future work and max_deployments caps scale-out") {
  PlatformConfig cfg = small_cfg();
  cfg.max_deployments = 2;
  Fixture fx(cfg);
  uint64_t a = fx.platform.deploy(0);
  fx.platform.deploy(0);
  CHECK_THROWS_AS(fx.platform.deploy(0), ScaleOutError);

  fx.platform.invoke(a, fx.platform.ready_at(a), CostCategory::io, "x", noop);
  fx.platform.retire(a);
  CHECK(fx.platform.is_retired(a));
  CHECK(fx.platform.instance_memory(a) == nullptr);
  CHECK_THROWS_AS(fx.platform.invoke(a, kSecond, CostCategory::io, "y", noop), StoreError);
  CHECK_THROWS_AS(fx.platform.ensure_instance(a), StoreError);
}

TEST_CASE("idle_ttl reclamation frees instances idle past the ttl") {
  PlatformConfig cfg = small_cfg();
  cfg.reclamation.mode = ReclamationPolicy::Mode::idle_ttl;
  cfg.reclamation.idle_ttl = 10 * kSecond;
  Fixture fx(cfg);
  uint64_t id = fx.platform.deploy(0);
  InvokeResult r = fx.platform.invoke(id, fx.platform.ready_at(id), CostCategory::io, "x", noop);

  CHECK(fx.platform.tick(r.completed_at + 9 * kSecond).empty());
  auto reclaimed = fx.platform.tick(r.completed_at + 10 * kSecond);
  REQUIRE(reclaimed.size() == 1);
  CHECK(reclaimed[0] == id);
  CHECK(fx.platform.live_instance_count() == 0);
}

TEST_CASE("random reclamation follows the configured probability") {
  PlatformConfig cfg = small_cfg();
  cfg.reclamation.mode = ReclamationPolicy::Mode::random_per_tick;
  cfg.reclamation.reclaim_probability = 1.0;
  Fixture fx(cfg);
  uint64_t id = fx.platform.deploy(0);
  fx.platform.invoke(id, fx.platform.ready_at(id), CostCategory::io, "x", noop);
  CHECK(fx.platform.tick(kSecond).size() == 1);

  PlatformConfig never = small_cfg();
  never.reclamation.mode = ReclamationPolicy::Mode::random_per_tick;
  never.reclamation.reclaim_probability = 0.0;
  Fixture fx2(never);
  uint64_t id2 = fx2.platform.deploy(0);
  fx2.platform.invoke(id2, fx2.platform.ready_at(id2), CostCategory::io, "x", noop);
  for (int i = 1; i <= 100; i++) CHECK(fx2.platform.tick(i * kSecond).empty());
}

TEST_CASE("scripted reclamation kills exactly the scheduled instance") {
  PlatformConfig cfg2 = small_cfg();
  cfg2.reclamation.mode = ReclamationPolicy::Mode::scripted;
  cfg2.reclamation.script = {{5 * kSecond, 1}};
  Fixture fx2(cfg2);
  uint64_t x = fx2.platform.deploy(0);
  uint64_t y = fx2.platform.deploy(0);
  fx2.platform.invoke(x, fx2.platform.ready_at(x), CostCategory::io, "x", noop);
  fx2.platform.invoke(y, fx2.platform.ready_at(y), CostCategory::io, "y", noop);

  CHECK(fx2.platform.tick(4 * kSecond).empty());
  auto hit = fx2.platform.tick(5 * kSecond);
  REQUIRE(hit.size() == 1);
  CHECK(hit[0] == x);
  CHECK(fx2.platform.instance_memory(y) != nullptr);
  // the script entry is consumed: later ticks do nothing
  CHECK(fx2.platform.tick(6 * kSecond).empty());
}

TEST_CASE("ensure_instance cold-creates without running a handler") {
  Fixture fx;
  uint64_t id = fx.platform.deploy(0);
  auto [mem, created] = fx.platform.ensure_instance(id);
  CHECK(created);
  CHECK(mem != nullptr);
  CHECK(fx.platform.generation(id) == 1);
  auto [mem2, created2] = fx.platform.ensure_instance(id);
  CHECK_FALSE(created2);
  CHECK(mem2 == mem);
  CHECK(fx.ledger.entry_count() == 0);  // no billing for engagement itself
}

TEST_CASE("invocation log records category and cause") {
  Fixture fx;
  uint64_t id = fx.platform.deploy(0);
  fx.platform.invoke(id, fx.platform.ready_at(id), CostCategory::warmup, "ping", noop);
  REQUIRE(fx.platform.invocation_log().size() == 1);
  const InvocationRecord& rec = fx.platform.invocation_log()[0];
  CHECK(rec.id_lambda == id);
  CHECK(rec.category == CostCategory::warmup);
  CHECK(rec.cause == "ping");
  CHECK(rec.was_cold);
}
