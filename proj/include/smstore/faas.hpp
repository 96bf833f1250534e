#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smstore/keys.hpp"
#include "smstore/metering.hpp"
#include "smstore/money.hpp"
#include "smstore/rng.hpp"
#include "smstore/vtime.hpp"

namespace smstore {

// What a function instance keeps in RAM between invocations. The platform
// owns creation/destruction; the embedding application supplies the concrete
// type via Runtime.
class InstanceMemory {
 public:
  virtual ~InstanceMemory() = default;
  virtual uint64_t used_bytes() const = 0;
};

struct InvocationContext {
  uint64_t id_lambda = 0;
  uint64_t generation = 0;   // bumps on every cold start
  bool cold = false;         // true when this invocation created the instance
  VirtualTime started_at = 0;
  InstanceMemory* memory = nullptr;
};

// Application side of the platform: builds fresh (empty) instance state on
// cold start. Invocation behavior itself is passed per-call as a handler.
class Runtime {
 public:
  virtual ~Runtime() = default;
  virtual std::unique_ptr<InstanceMemory> make_cold_memory(uint64_t id_lambda) = 0;
};

struct BillingRates {
  Money per_invocation = Money::from_pico(20000);       // $0.02 per 1M
  Money per_gb_second = Money::from_pico(16666700);     // $0.0000166667
};

struct ReclamationPolicy {
  enum class Mode { none, idle_ttl, random_per_tick, scripted };
  Mode mode = Mode::none;
  VirtualDuration idle_ttl = 10 * kMinute;  // idle_ttl mode
  double reclaim_probability = 0.0;         // random_per_tick mode, per instance per tick
  // scripted mode: exact (time, deployment) kills, applied by ticks at >= time
  std::vector<std::pair<VirtualTime, uint64_t>> script;
};

struct PlatformConfig {
  uint64_t memory_limit = 1536ull << 20;  // per instance
  VirtualDuration cold_start = 100 * kMillisecond;
  VirtualDuration warm_start = 5 * kMillisecond;
  VirtualDuration deploy_latency = 50 * kMillisecond;
  BillingRates billing;
  ReclamationPolicy reclamation;
  uint64_t max_deployments = 0;  // 0 = unlimited
};

struct InvokeResult {
  VirtualTime completed_at = 0;
  VirtualDuration overhead = 0;   // cold or warm start
  VirtualDuration exec = 0;       // handler-reported execution time
  int64_t billed_ms = 0;
  bool was_cold = false;
  uint64_t generation = 0;
};

struct InvocationRecord {
  uint64_t id_lambda = 0;
  VirtualTime started_at = 0;
  VirtualTime completed_at = 0;
  bool was_cold = false;
  CostCategory category = CostCategory::io;
  std::string cause;
};

// Handler returns how long the invocation's work took (virtual time); the
// platform adds start overhead and bills ceil-to-ms with a 1 ms floor.
using InvokeHandler = std::function<VirtualDuration(InvocationContext&)>;

// Simulated FaaS control plane: deployments with at most one live instance
// each, pay-per-invocation billing, and reclamation that silently destroys
// instance state between invocations.
class Platform {
 public:
  Platform(PlatformConfig cfg, Runtime* runtime, CostLedger* ledger, Rng rng)
      : cfg_(cfg), runtime_(runtime), ledger_(ledger), rng_(rng) {}

  // Registers a new deployment; it can serve invocations from
  // now + deploy_latency. Throws ScaleOutError past max_deployments.
  uint64_t deploy(VirtualTime now);
  void retire(uint64_t id_lambda);  // destroys instance, rejects future invokes

  VirtualTime ready_at(uint64_t id_lambda) const;
  bool is_retired(uint64_t id_lambda) const;

  // Runs `handler` on the deployment's instance at virtual time `start`
  // (cold-starting if needed), charges the ledger, and returns timing.
  InvokeResult invoke(uint64_t id_lambda, VirtualTime start, CostCategory category,
                      const std::string& cause, const InvokeHandler& handler);

  // Charges a long-running background transfer on the instance (recovery
  // traffic): billed like an invocation of `duration` but does not touch
  // instance generation/idle state.
  void charge_background(uint64_t id_lambda, VirtualTime at, VirtualDuration duration,
                         CostCategory category, const std::string& cause);

  // Cold-creates the instance if necessary without running a handler (used
  // when engaging an instance for background recovery work). Returns the
  // live memory and whether this call created it.
  std::pair<InstanceMemory*, bool> ensure_instance(uint64_t id_lambda);

  // Applies the reclamation policy at virtual time `now`; returns the ids
  // whose instances were reclaimed.
  std::vector<uint64_t> tick(VirtualTime now);
  // Forces reclamation of one deployment's instance (test hook and scripted
  // kills route through here).
  bool reclaim(uint64_t id_lambda);

  // Live instance memory, or nullptr when the deployment is cold/retired.
  InstanceMemory* instance_memory(uint64_t id_lambda);
  uint64_t generation(uint64_t id_lambda) const;
  VirtualTime last_finished_at(uint64_t id_lambda) const;

  size_t deployment_count() const { return deployments_.size(); }
  size_t live_instance_count() const;
  uint64_t memory_limit() const { return cfg_.memory_limit; }
  const std::vector<InvocationRecord>& invocation_log() const { return log_; }

 private:
  struct Deployment {
    uint64_t id = 0;
    VirtualTime ready_at = 0;
    bool retired = false;
    uint64_t generation = 0;            // 0 = never started
    std::unique_ptr<InstanceMemory> memory;  // null when cold
    VirtualTime last_finished_at = 0;
  };

  Deployment& get(uint64_t id_lambda);
  const Deployment& get(uint64_t id_lambda) const;

  PlatformConfig cfg_;
  Runtime* runtime_;
  CostLedger* ledger_;
  Rng rng_;
  std::map<uint64_t, Deployment> deployments_;
  uint64_t next_id_ = 1;
  size_t script_cursor_ = 0;
  std::vector<InvocationRecord> log_;
};

}  // namespace smstore
