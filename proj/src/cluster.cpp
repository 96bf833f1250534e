#include "smstore/cluster.hpp"

namespace smstore {

namespace {

std::unique_ptr<CosBackend> make_backend(const SystemConfig& cfg) {
  if (cfg.cos_backend == "filesystem") return make_filesystem_backend(cfg.cos_root);
  return make_memory_backend();
}

SystemConfig validated(SystemConfig cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Cluster::Cluster(SystemConfig cfg)
    : cfg_(validated(std::move(cfg))),
      engine_(&clock_),
      cos_(make_backend(cfg_), cfg_.cos_rates, cfg_.cos_latency, &ledger_),
      runtime_(cfg_.faas.memory_limit, cfg_.daemon.snapshot_every,
               cfg_.daemon.exec_bytes_per_sec),
      platform_(cfg_.faas, &runtime_, &ledger_,
                Rng(cfg_.seed).fork(hash64("platform"))) {
  Rng root(cfg_.seed);
  std::vector<Daemon*> raw;
  for (uint32_t i = 0; i < cfg_.daemons; i++) {
    std::string name = "daemon-" + std::to_string(i);
    daemons_.push_back(std::make_unique<Daemon>(name, cfg_, &engine_, &platform_, &cos_,
                                                &ledger_, root.fork(hash64(name))));
    raw.push_back(daemons_.back().get());
  }
  client_ = std::make_unique<Client>(&engine_, raw, cfg_.ring_vnodes);
}

void Cluster::start() {
  if (started_) return;
  started_ = true;
  for (auto& d : daemons_) d->start();
  if (cfg_.faas.reclamation.mode != ReclamationPolicy::Mode::none) {
    engine_.schedule_in(cfg_.daemon.reclamation_poll, [this]() { reclamation_tick(); },
                        /*weak=*/true);
  }
  engine_.schedule_in(kMinute, [this]() { rent_tick(); }, /*weak=*/true);
}

void Cluster::reclamation_tick() {
  platform_.tick(engine_.now());
  engine_.schedule_in(cfg_.daemon.reclamation_poll, [this]() { reclamation_tick(); },
                      /*weak=*/true);
}

void Cluster::rent_tick() {
  cos_.post_storage_rent(engine_.now());
  engine_.schedule_in(kMinute, [this]() { rent_tick(); }, /*weak=*/true);
}

void Cluster::run_to_completion(VirtualTime hard_limit) {
  engine_.run_until_quiescent(hard_limit);
  settle_rent();
}

void Cluster::settle_rent() { cos_.post_storage_rent(engine_.now()); }

HitStats Cluster::total_hits() const {
  HitStats out;
  for (const auto& d : daemons_) out.merge(d->hit_stats());
  return out;
}

}  // namespace smstore
