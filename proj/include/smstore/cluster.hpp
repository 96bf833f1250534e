#pragma once

#include <memory>
#include <vector>

#include "smstore/client.hpp"
#include "smstore/config.hpp"
#include "smstore/cos.hpp"
#include "smstore/daemon.hpp"
#include "smstore/engine.hpp"
#include "smstore/faas.hpp"
#include "smstore/function_memory.hpp"
#include "smstore/metering.hpp"

namespace smstore {

// Wires a complete simulated deployment from one SystemConfig: clock,
// engine, ledger, object store, platform, daemons and client. Owns the
// platform-wide periodic work (reclamation ticks, storage-rent posting).
class Cluster {
 public:
  explicit Cluster(SystemConfig cfg);

  // Starts every daemon and the periodic platform maintenance.
  void start();

  // Drains all scheduled work, then settles outstanding storage rent.
  void run_to_completion(VirtualTime hard_limit);
  // Posts COS rent up to now; call after any manual engine driving.
  void settle_rent();

  SystemConfig& config() { return cfg_; }
  Engine& engine() { return engine_; }
  Client& client() { return *client_; }
  Daemon& daemon(size_t i = 0) { return *daemons_.at(i); }
  size_t daemon_count() const { return daemons_.size(); }
  Platform& platform() { return platform_; }
  CosStore& cos() { return cos_; }
  CostLedger& ledger() { return ledger_; }

  // Combined hit statistics across daemons.
  HitStats total_hits() const;

 private:
  void reclamation_tick();
  void rent_tick();

  SystemConfig cfg_;
  VirtualClock clock_;
  Engine engine_;
  CostLedger ledger_;
  CosStore cos_;
  StoreRuntime runtime_;
  Platform platform_;
  std::vector<std::unique_ptr<Daemon>> daemons_;
  std::unique_ptr<Client> client_;
  bool started_ = false;
};

}  // namespace smstore
