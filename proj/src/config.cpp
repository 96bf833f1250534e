#include "smstore/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

extern char** environ;

namespace smstore {

void DaemonConfig::validate() const {
  if (bucket_interval <= 0) throw ConfigError("sms: bucket_interval_s must be > 0");
  if (active_intervals < 1) throw ConfigError("sms: active_intervals must be >= 1");
  if (degraded_intervals < active_intervals) {
    throw ConfigError("sms: degraded_intervals must be >= active_intervals");
  }
  if (hardcap_fraction <= 0.0 || hardcap_fraction > 1.0) {
    throw ConfigError("sms: hardcap_fraction must be in (0, 1]");
  }
  if (queue_capacity < 1) throw ConfigError("sms: queue_capacity must be >= 1");
  if (large_threshold < 1) throw ConfigError("sms: large_threshold_kb must be >= 1");
  if (snapshot_every < 1) throw ConfigError("sms: snapshot_every must be >= 1");
  if (recovery_group < 1) throw ConfigError("sms: recovery_group must be >= 1");
  if (piece_parallelism < 1) throw ConfigError("sms: piece_parallelism must be >= 1");
  if (exec_bytes_per_sec == 0) throw ConfigError("sms: exec_mbps must be > 0");
  if (!elastic && fixed_pool_groups < 1) {
    throw ConfigError("sms: fixed_pool_groups must be >= 1 in fixed mode");
  }
  if (migration_throttle <= 0) throw ConfigError("sms: migration_throttle_ms must be > 0");
  if (warmup_poll <= 0 || reclamation_poll <= 0 || sample_interval <= 0) {
    throw ConfigError("sms: poll intervals must be > 0");
  }
}

void SystemConfig::validate() const {
  if (daemons < 1) throw ConfigError("daemons must be >= 1");
  if (ring_vnodes < 1) throw ConfigError("ring_vnodes must be >= 1");
  ec.validate();
  bounds.validate();
  if (cos_backend != "memory" && cos_backend != "filesystem") {
    throw ConfigError("cos: backend must be 'memory' or 'filesystem'");
  }
  if (cos_backend == "filesystem" && cos_root.empty()) {
    throw ConfigError("cos: filesystem backend needs a root directory");
  }
  if (faas.memory_limit == 0) throw ConfigError("faas: memory_limit_mb must be > 0");
  daemon.validate();
}

namespace {

using nlohmann::json;

uint64_t as_u64(const std::string& where, const json& v) {
  if (!v.is_number_unsigned() && !v.is_number_integer()) {
    throw ConfigError(where + ": expected an integer");
  }
  if (v.is_number_integer() && v.get<int64_t>() < 0) {
    throw ConfigError(where + ": must be non-negative");
  }
  return v.get<uint64_t>();
}

uint32_t as_u32(const std::string& where, const json& v) {
  uint64_t x = as_u64(where, v);
  if (x > UINT32_MAX) throw ConfigError(where + ": out of range");
  return static_cast<uint32_t>(x);
}

double as_dbl(const std::string& where, const json& v) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

bool as_bool(const std::string& where, const json& v) {
  if (!v.is_boolean()) throw ConfigError(where + ": expected true/false");
  return v.get<bool>();
}

std::string as_str(const std::string& where, const json& v) {
  if (!v.is_string()) throw ConfigError(where + ": expected a string");
  return v.get<std::string>();
}

VirtualDuration seconds(const std::string& where, const json& v) {
  double s = as_dbl(where, v);
  if (s < 0) throw ConfigError(where + ": must be non-negative");
  return static_cast<VirtualDuration>(s * static_cast<double>(kSecond));
}

VirtualDuration millis(const std::string& where, const json& v) {
  double ms = as_dbl(where, v);
  if (ms < 0) throw ConfigError(where + ": must be non-negative");
  return static_cast<VirtualDuration>(ms * static_cast<double>(kMillisecond));
}

void apply_key(SystemConfig& c, const std::string& section, const std::string& key,
               const json& v) {
  std::string where = section.empty() ? key : section + "." + key;

  if (section.empty()) {
    if (key == "seed") c.seed = as_u64(where, v);
    else if (key == "daemons") c.daemons = as_u32(where, v);
    else if (key == "ring_vnodes") c.ring_vnodes = as_u32(where, v);
    else throw ConfigError("unknown config key: " + where);
    return;
  }
  if (section == "ec") {
    if (key == "d") c.ec.d = as_u32(where, v);
    else if (key == "p") c.ec.p = as_u32(where, v);
    else throw ConfigError("unknown config key: " + where);
    return;
  }
  if (section == "bounds") {
    if (key == "upper_bound_mb") c.bounds.upper_bound = as_u64(where, v) << 20;
    else if (key == "lower_bound_mb") c.bounds.lower_bound = as_u64(where, v) << 20;
    else throw ConfigError("unknown config key: " + where);
    return;
  }
  if (section == "faas") {
    if (key == "memory_limit_mb") c.faas.memory_limit = as_u64(where, v) << 20;
    else if (key == "cold_start_ms") c.faas.cold_start = millis(where, v);
    else if (key == "warm_start_ms") c.faas.warm_start = millis(where, v);
    else if (key == "deploy_ms") c.faas.deploy_latency = millis(where, v);
    else if (key == "per_invocation_usd") c.faas.billing.per_invocation = Money::from_dollars(as_dbl(where, v));
    else if (key == "per_gb_second_usd") c.faas.billing.per_gb_second = Money::from_dollars(as_dbl(where, v));
    else if (key == "max_deployments") c.faas.max_deployments = as_u64(where, v);
    else throw ConfigError("unknown config key: " + where);
    return;
  }
  if (section == "faas_reclamation") {
    if (key == "mode") {
      std::string m = as_str(where, v);
      if (m == "none") c.faas.reclamation.mode = ReclamationPolicy::Mode::none;
      else if (m == "idle_ttl") c.faas.reclamation.mode = ReclamationPolicy::Mode::idle_ttl;
      else if (m == "random") c.faas.reclamation.mode = ReclamationPolicy::Mode::random_per_tick;
      else throw ConfigError(where + ": must be none|idle_ttl|random");
    } else if (key == "idle_ttl_s") {
      c.faas.reclamation.idle_ttl = seconds(where, v);
    } else if (key == "probability") {
      double p = as_dbl(where, v);
      if (p < 0.0 || p > 1.0) throw ConfigError(where + ": must be in [0, 1]");
      c.faas.reclamation.reclaim_probability = p;
    } else {
      throw ConfigError("unknown config key: " + where);
    }
    return;
  }
  if (section == "cos") {
    if (key == "backend") c.cos_backend = as_str(where, v);
    else if (key == "root") c.cos_root = as_str(where, v);
    else if (key == "per_request_usd") c.cos_rates.per_request = Money::from_dollars(as_dbl(where, v));
    else if (key == "per_gb_month_usd") c.cos_rates.per_gb_month = Money::from_dollars(as_dbl(where, v));
    else if (key == "base_latency_ms") c.cos_latency.base = millis(where, v);
    else if (key == "bandwidth_mbps") c.cos_latency.bytes_per_sec = as_u64(where, v) << 20;
    else throw ConfigError("unknown config key: " + where);
    return;
  }
  if (section == "sms") {
    DaemonConfig& d = c.daemon;
    if (key == "bucket_interval_s") d.bucket_interval = seconds(where, v);
    else if (key == "active_intervals") d.active_intervals = as_u32(where, v);
    else if (key == "degraded_intervals") d.degraded_intervals = as_u32(where, v);
    else if (key == "hardcap_fraction") d.hardcap_fraction = as_dbl(where, v);
    else if (key == "queue_capacity") d.queue_capacity = as_u64(where, v);
    else if (key == "large_threshold_kb") d.large_threshold = as_u64(where, v) << 10;
    else if (key == "consolidation_window_ms") d.consolidation_window = millis(where, v);
    else if (key == "snapshot_every") d.snapshot_every = as_u32(where, v);
    else if (key == "recovery_group") d.recovery_group = as_u32(where, v);
    else if (key == "recovery_k") d.recovery_k = as_u32(where, v);
    else if (key == "recovery_replacement_cap") d.recovery_replacement_cap = as_u32(where, v);
    else if (key == "shard_retention_s") d.shard_retention = seconds(where, v);
    else if (key == "warmup_active_s") d.warmup_active = seconds(where, v);
    else if (key == "warmup_degraded_s") d.warmup_degraded = seconds(where, v);
    else if (key == "warmup_poll_s") d.warmup_poll = seconds(where, v);
    else if (key == "migration_throttle_ms") d.migration_throttle = millis(where, v);
    else if (key == "migration_max_s") d.migration_max = seconds(where, v);
    else if (key == "piece_parallelism") d.piece_parallelism = as_u32(where, v);
    else if (key == "exec_mbps") d.exec_bytes_per_sec = as_u64(where, v) << 20;
    else if (key == "demand_cache") d.demand_cache = as_bool(where, v);
    else if (key == "parallel_recovery") d.parallel_recovery = as_bool(where, v);
    else if (key == "elastic") d.elastic = as_bool(where, v);
    else if (key == "fixed_pool_groups") d.fixed_pool_groups = as_u32(where, v);
    else if (key == "reclamation_poll_s") d.reclamation_poll = seconds(where, v);
    else if (key == "sample_interval_s") d.sample_interval = seconds(where, v);
    else throw ConfigError("unknown config key: " + where);
    return;
  }
  throw ConfigError("unknown config section: " + section);
}

void apply_json(SystemConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "ec" || key == "bounds" || key == "cos" || key == "sms") {
      if (!value.is_object()) throw ConfigError(key + ": expected an object");
      for (const auto& [k2, v2] : value.items()) apply_key(c, key, k2, v2);
    } else if (key == "faas") {
      if (!value.is_object()) throw ConfigError("faas: expected an object");
      for (const auto& [k2, v2] : value.items()) {
        if (k2 == "reclamation") {
          if (!v2.is_object()) throw ConfigError("faas.reclamation: expected an object");
          for (const auto& [k3, v3] : v2.items()) apply_key(c, "faas_reclamation", k3, v3);
        } else {
          apply_key(c, "faas", k2, v2);
        }
      }
    } else {
      apply_key(c, "", key, value);
    }
  }
}

json env_value(const std::string& raw) {
  if (raw == "true") return json(true);
  if (raw == "false") return json(false);
  if (json::accept(raw)) {
    json v = json::parse(raw);
    if (v.is_number()) return v;
  }
  return json(raw);
}

void apply_env(SystemConfig& c) {
  static const std::vector<std::pair<std::string, std::string>> kSections = {
      {"EC_", "ec"},
      {"BOUNDS_", "bounds"},
      {"FAAS_RECLAMATION_", "faas_reclamation"},
      {"FAAS_", "faas"},
      {"COS_", "cos"},
      {"SMS_", "sms"},
  };
  std::vector<std::pair<std::string, std::string>> vars;
  for (char** e = environ; *e != nullptr; e++) {
    std::string entry(*e);
    if (entry.rfind("SMSTORE_", 0) != 0) continue;
    size_t eq = entry.find('=');
    if (eq == std::string::npos) continue;
    vars.emplace_back(entry.substr(8, eq - 8), entry.substr(eq + 1));
  }
  std::sort(vars.begin(), vars.end());
  for (const auto& [name, raw] : vars) {
    std::string section;
    std::string key = name;
    for (const auto& [prefix, sec] : kSections) {
      if (name.rfind(prefix, 0) == 0) {
        section = sec;
        key = name.substr(prefix.size());
        break;
      }
    }
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    apply_key(c, section, key, env_value(raw));
  }
}

}  // namespace

SystemConfig config_from_json_text(const std::string& text, bool with_env) {
  SystemConfig c;
  if (!text.empty()) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    apply_json(c, j);
  }
  if (with_env) apply_env(c);
  c.validate();
  return c;
}

SystemConfig load_config(const std::string& json_path) {
  std::string text;
  if (!json_path.empty()) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + json_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return config_from_json_text(text, /*with_env=*/true);
}

}  // namespace smstore
