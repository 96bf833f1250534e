#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "smstore/cluster.hpp"
#include "smstore/replay.hpp"

using namespace smstore;

namespace {

SystemConfig multi_cfg(uint32_t daemons) {
  SystemConfig cfg;
  cfg.seed = 5;
  cfg.daemons = daemons;
  cfg.ring_vnodes = 128;
  cfg.ec.d = 2;
  cfg.ec.p = 1;
  cfg.faas.memory_limit = 64ull << 20;
  cfg.daemon.queue_capacity = 64;
  return cfg;
}

}  // namespace

TEST_CASE("routing is deterministic and spreads keys across daemons") {
  Cluster cl(multi_cfg(3));
  cl.start();
  Client& client = cl.client();
  CHECK(client.ring_size() == 3 * 128);

  std::map<std::string, size_t> counts;
  for (int i = 0; i < 1000; i++) {
    ObjectKey key("key-" + std::to_string(i));
    Daemon& first = client.route(key);
    // Same key, same daemon, every time.
    for (int r = 0; r < 3; r++) CHECK(&client.route(key) == &first);
    counts[first.name()]++;
  }

  REQUIRE(counts.size() == 3);
  for (const auto& [name, n] : counts) {
    // Rough balance: no daemon owns less than 10% or more than 60%.
    CHECK(n >= 100);
    CHECK(n <= 600);
  }
}

TEST_CASE("two clusters with the same seed route identically") {
  Cluster a(multi_cfg(3)), b(multi_cfg(3));
  a.start();
  b.start();
  for (int i = 0; i < 200; i++) {
    ObjectKey key("k-" + std::to_string(i));
    CHECK(a.client().route(key).name() == b.client().route(key).name());
  }
}

TEST_CASE("multi-daemon cluster serves puts and gets end to end") {
  Cluster cl(multi_cfg(3));
  cl.start();

  const int n = 50;
  for (int i = 0; i < n; i++) {
    ObjectKey key("obj-" + std::to_string(i));
    REQUIRE(cl.client().put_sync(key, make_payload(key, 32 << 10)).ok);
  }
  for (int i = 0; i < n; i++) {
    ObjectKey key("obj-" + std::to_string(i));
    GetResult res = cl.client().get_sync(key);
    REQUIRE(res.ok);
    CHECK(res.payload == make_payload(key, 32 << 10));
  }

  // Work landed on every daemon and the per-daemon counters add up.
  uint64_t puts = 0, gets = 0;
  size_t active_daemons = 0;
  for (size_t i = 0; i < cl.daemon_count(); i++) {
    const DaemonCounters& c = cl.daemon(i).counters();
    puts += c.puts;
    gets += c.gets;
    if (c.puts > 0) active_daemons++;
    // An object's mapping lives fully on the daemon that owns the key.
    for (const auto& row : cl.daemon(i).mapping_table()) {
      CHECK(&cl.client().route(row.ref.key) == &cl.daemon(i));
    }
  }
  CHECK(puts == n);
  CHECK(gets == n);
  CHECK(active_daemons == 3);

  HitStats hs = cl.total_hits();
  CHECK(hs.total() == n * cl.config().ec.total());
  CHECK(hs.hits() == hs.total());
}
