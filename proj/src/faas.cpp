#include "smstore/faas.hpp"

#include <algorithm>

namespace smstore {

Platform::Deployment& Platform::get(uint64_t id_lambda) {
  auto it = deployments_.find(id_lambda);
  if (it == deployments_.end()) {
    throw StoreError("unknown deployment " + std::to_string(id_lambda));
  }
  return it->second;
}

const Platform::Deployment& Platform::get(uint64_t id_lambda) const {
  auto it = deployments_.find(id_lambda);
  if (it == deployments_.end()) {
    throw StoreError("unknown deployment " + std::to_string(id_lambda));
  }
  return it->second;
}

uint64_t Platform::deploy(VirtualTime now) {
  if (cfg_.max_deployments && deployments_.size() >= cfg_.max_deployments) {
    throw ScaleOutError("deployment limit reached (" + std::to_string(cfg_.max_deployments) +
                        ")");
  }
  uint64_t id = next_id_++;
  Deployment d;
  d.id = id;
  d.ready_at = now + cfg_.deploy_latency;
  deployments_.emplace(id, std::move(d));
  return id;
}

void Platform::retire(uint64_t id_lambda) {
  Deployment& d = get(id_lambda);
  d.retired = true;
  d.memory.reset();
}

VirtualTime Platform::ready_at(uint64_t id_lambda) const { return get(id_lambda).ready_at; }

bool Platform::is_retired(uint64_t id_lambda) const { return get(id_lambda).retired; }

InvokeResult Platform::invoke(uint64_t id_lambda, VirtualTime start, CostCategory category,
                              const std::string& cause, const InvokeHandler& handler) {
  Deployment& d = get(id_lambda);
  if (d.retired) throw StoreError("deployment retired: " + std::to_string(id_lambda));
  if (start < d.ready_at) {
    throw StoreError("deployment " + std::to_string(id_lambda) + " not ready yet");
  }

  InvokeResult res;
  res.was_cold = (d.memory == nullptr);
  if (res.was_cold) {
    d.generation++;
    d.memory = runtime_->make_cold_memory(id_lambda);
    res.overhead = cfg_.cold_start;
  } else {
    res.overhead = cfg_.warm_start;
  }
  res.generation = d.generation;

  InvocationContext ctx;
  ctx.id_lambda = id_lambda;
  ctx.generation = d.generation;
  ctx.cold = res.was_cold;
  ctx.started_at = start;
  ctx.memory = d.memory.get();
  res.exec = handler(ctx);

  res.completed_at = start + res.overhead + res.exec;
  res.billed_ms = std::max<int64_t>(1, ceil_ms(res.overhead + res.exec));
  d.last_finished_at = std::max(d.last_finished_at, res.completed_at);

  ledger_->charge(start, category, cfg_.billing.per_invocation, cause + "/invoke");
  ledger_->charge(start, category,
                  gb_second_charge(cfg_.billing.per_gb_second, cfg_.memory_limit, res.billed_ms),
                  cause + "/compute");
  log_.push_back({id_lambda, start, res.completed_at, res.was_cold, category, cause});
  return res;
}

void Platform::charge_background(uint64_t id_lambda, VirtualTime at, VirtualDuration duration,
                                 CostCategory category, const std::string& cause) {
  int64_t billed_ms = std::max<int64_t>(1, ceil_ms(duration));
  ledger_->charge(at, category, cfg_.billing.per_invocation, cause + "/invoke");
  ledger_->charge(at, category,
                  gb_second_charge(cfg_.billing.per_gb_second, cfg_.memory_limit, billed_ms),
                  cause + "/compute");
  log_.push_back({id_lambda, at, at + duration, false, category, cause});
}

std::pair<InstanceMemory*, bool> Platform::ensure_instance(uint64_t id_lambda) {
  Deployment& d = get(id_lambda);
  if (d.retired) throw StoreError("deployment retired: " + std::to_string(id_lambda));
  if (d.memory) return {d.memory.get(), false};
  d.generation++;
  d.memory = runtime_->make_cold_memory(id_lambda);
  return {d.memory.get(), true};
}

bool Platform::reclaim(uint64_t id_lambda) {
  Deployment& d = get(id_lambda);
  if (!d.memory) return false;
  d.memory.reset();  // silent: state is simply gone
  return true;
}

std::vector<uint64_t> Platform::tick(VirtualTime now) {
  std::vector<uint64_t> reclaimed;
  switch (cfg_.reclamation.mode) {
    case ReclamationPolicy::Mode::none:
      break;
    case ReclamationPolicy::Mode::idle_ttl:
      for (auto& [id, d] : deployments_) {
        if (d.memory && now - d.last_finished_at >= cfg_.reclamation.idle_ttl) {
          d.memory.reset();
          reclaimed.push_back(id);
        }
      }
      break;
    case ReclamationPolicy::Mode::random_per_tick:
      for (auto& [id, d] : deployments_) {
        if (d.memory && rng_.next_double() < cfg_.reclamation.reclaim_probability) {
          d.memory.reset();
          reclaimed.push_back(id);
        }
      }
      break;
    case ReclamationPolicy::Mode::scripted:
      while (script_cursor_ < cfg_.reclamation.script.size() &&
             cfg_.reclamation.script[script_cursor_].first <= now) {
        uint64_t id = cfg_.reclamation.script[script_cursor_].second;
        script_cursor_++;
        auto it = deployments_.find(id);
        if (it != deployments_.end() && it->second.memory) {
          it->second.memory.reset();
          reclaimed.push_back(id);
        }
      }
      break;
  }
  return reclaimed;
}

InstanceMemory* Platform::instance_memory(uint64_t id_lambda) {
  auto it = deployments_.find(id_lambda);
  if (it == deployments_.end()) return nullptr;
  return it->second.memory.get();
}

uint64_t Platform::generation(uint64_t id_lambda) const { return get(id_lambda).generation; }

VirtualTime Platform::last_finished_at(uint64_t id_lambda) const {
  return get(id_lambda).last_finished_at;
}

size_t Platform::live_instance_count() const {
  size_t n = 0;
  for (const auto& [id, d] : deployments_) {
    if (d.memory) n++;
  }
  return n;
}

}  // namespace smstore
