#include "smstore/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <memory>

namespace smstore {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::vector<ObjectKey> preload(Cluster& cluster, uint32_t objects, uint64_t object_size,
                               const char* prefix) {
  std::vector<ObjectKey> keys;
  keys.reserve(objects);
  for (uint32_t i = 0; i < objects; i++) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%05u", prefix, i);
    keys.emplace_back(buf);
    PutAck ack = cluster.client().put_sync(keys.back(), make_payload(keys.back(), object_size));
    if (!ack.ok) throw StoreError("bench preload PUT failed: " + ack.error);
  }
  return keys;
}

bool payload_matches(const ObjectKey& key, uint64_t size, const Blob& got,
                     std::vector<uint8_t>& scratch) {
  if (got.size() != size) return false;
  if (size == 0) return true;
  scratch.resize(size);
  fill_pseudorandom(scratch, payload_seed(key, size));
  return std::memcmp(scratch.data(), got.data(), size) == 0;
}

}  // namespace

RecoveryBenchResult bench_recovery(const RecoveryBenchOptions& opt) {
  Cluster cluster(opt.config);
  cluster.start();
  Engine& eng = cluster.engine();

  std::vector<ObjectKey> keys =
      preload(cluster, opt.objects, opt.object_size, "recovery-bench-");

  // victim: the deployment holding the most admitted storage bytes
  uint64_t victim = 0, victim_bytes = 0;
  for (const auto& fi : cluster.daemon(0).function_table()) {
    if (fi.removed) continue;
    if (fi.admitted_bytes > victim_bytes) {
      victim_bytes = fi.admitted_bytes;
      victim = fi.id;
    }
  }
  if (victim_bytes == 0) throw StoreError("bench: preload placed no storage bytes");

  struct State {
    std::vector<ObjectKey> keys;
    uint64_t object_size = 0;
    size_t next = 0;
    uint64_t gets = 0, failed = 0;
    std::vector<uint8_t> scratch;
  };
  auto st = std::make_shared<State>();
  st->keys = keys;
  st->object_size = opt.object_size;

  VirtualTime start = eng.now();
  VirtualTime read_end = start + opt.read_for;
  Client& client = cluster.client();

  // period-driven GET schedule, fixed at setup so the kill lands mid-stream
  for (VirtualTime at = start; at < read_end; at += opt.read_period) {
    eng.schedule(at, [&client, st]() {
      const ObjectKey key = st->keys[st->next % st->keys.size()];
      st->next++;
      client.submit_get(key, [st, key](GetResult res) {
        st->gets++;
        if (!res.ok) {
          st->failed++;
          return;
        }
        if (!payload_matches(key, st->object_size, res.payload, st->scratch)) {
          throw VerificationError("bench GET returned wrong bytes: " + key.name());
        }
      });
    });
  }

  Platform& platform = cluster.platform();
  eng.schedule(start + opt.kill_at, [&platform, victim]() { platform.reclaim(victim); });

  cluster.run_to_completion(read_end + kHour);

  RecoveryBenchResult out;
  out.group_size = opt.config.daemon.recovery_group;
  out.victim = victim;
  out.gets = st->gets;
  out.failed_gets = st->failed;
  for (const auto& rep : cluster.daemon(0).recovery_reports()) {
    if (rep.fn != victim) continue;
    out.detected = true;
    out.diff = rep.diff;
    out.mode = rep.mode;
    out.manifest_bytes = rep.manifest_bytes;
    out.detect_latency = rep.detected_at - (start + opt.kill_at);
    if (rep.parallel_done_at >= 0) out.parallel_phase = rep.parallel_done_at - rep.detected_at;
    if (rep.local_done_at >= 0) out.local_phase = rep.local_done_at - rep.detected_at;
    out.helpers_deployed = rep.helpers_deployed;
    out.replacements = rep.replacements;
    out.rerouted_reads = rep.rerouted_reads;
    out.blocked_reads = rep.blocked_reads;
    break;  // first (non-restarted) report for the victim
  }
  return out;
}

std::string RecoveryBenchResult::to_text() const {
  std::string out;
  out += "group_size: " + std::to_string(group_size) + "\n";
  out += "victim: " + std::to_string(victim) + "\n";
  out += "detected: " + std::string(detected ? "true" : "false") + "\n";
  out += "diff: " + std::to_string(diff) + "\n";
  out += "mode: " + std::string(mode == RecoveryMode::parallel ? "parallel" : "local_only") + "\n";
  out += "manifest_bytes: " + std::to_string(manifest_bytes) + "\n";
  out += "detect_latency_us: " + std::to_string(detect_latency) + "\n";
  out += "parallel_phase_us: " + std::to_string(parallel_phase) + "\n";
  out += "local_phase_us: " + std::to_string(local_phase) + "\n";
  out += "helpers_deployed: " + std::to_string(helpers_deployed) + "\n";
  out += "replacements: " + std::to_string(replacements) + "\n";
  out += "rerouted_reads: " + std::to_string(rerouted_reads) + "\n";
  out += "blocked_reads: " + std::to_string(blocked_reads) + "\n";
  out += "gets: " + std::to_string(gets) + "\n";
  out += "failed_gets: " + std::to_string(failed_gets) + "\n";
  return out;
}

ElasticityBenchResult bench_elasticity(const ElasticityBenchOptions& opt) {
  if (opt.steps.empty()) throw ConfigError("bench: steps must be non-empty");
  Cluster cluster(opt.config);
  cluster.start();
  Engine& eng = cluster.engine();
  Client& client = cluster.client();

  std::vector<ObjectKey> keys =
      preload(cluster, opt.objects, opt.object_size, "elastic-bench-");

  size_t nsteps = opt.steps.size();
  VirtualTime bench_start = eng.now() + kSecond;
  VirtualTime bench_end = bench_start + static_cast<VirtualDuration>(nsteps) * opt.step_duration;

  struct State {
    std::vector<ObjectKey> keys;
    uint64_t object_size = 0;
    VirtualTime bench_start = 0, bench_end = 0;
    VirtualDuration step_duration = 0;
    size_t nsteps = 0;
    std::vector<uint64_t> completed;
    std::vector<std::vector<VirtualDuration>> latencies;
    std::vector<Rng> rngs;
    uint64_t failed = 0;
    std::vector<uint8_t> scratch;
    std::function<void(uint32_t)> issue;
  };
  auto st = std::make_shared<State>();
  st->keys = keys;
  st->object_size = opt.object_size;
  st->bench_start = bench_start;
  st->bench_end = bench_end;
  st->step_duration = opt.step_duration;
  st->nsteps = nsteps;
  st->completed.assign(nsteps, 0);
  st->latencies.assign(nsteps, {});
  uint32_t max_readers = *std::max_element(opt.steps.begin(), opt.steps.end());
  Rng bench_rng(opt.config.seed);
  for (uint32_t r = 0; r < max_readers; r++) {
    st->rngs.push_back(bench_rng.fork(hash64("bench-reader") + r));
  }

  st->issue = [st, &client, &eng](uint32_t reader) {
    if (eng.now() >= st->bench_end) return;
    const ObjectKey key = st->keys[st->rngs[reader].bounded(st->keys.size())];
    VirtualTime submitted = eng.now();
    client.submit_get(key, [st, reader, key, submitted](GetResult res) {
      if (!res.ok) {
        st->failed++;
      } else {
        if (!payload_matches(key, st->object_size, res.payload, st->scratch)) {
          throw VerificationError("bench GET returned wrong bytes: " + key.name());
        }
        VirtualTime done = res.completed_at;
        if (done >= st->bench_start && done < st->bench_end) {
          auto step = static_cast<size_t>((done - st->bench_start) / st->step_duration);
          if (step >= st->nsteps) step = st->nsteps - 1;
          st->completed[step]++;
          st->latencies[step].push_back(done - submitted);
        }
      }
      st->issue(reader);  // closed loop: next request on completion
    });
  };

  uint32_t spawned = 0;
  for (size_t i = 0; i < nsteps; i++) {
    uint32_t target = opt.steps[i];
    VirtualTime at = bench_start + static_cast<VirtualDuration>(i) * opt.step_duration;
    for (uint32_t r = spawned; r < target; r++) {
      eng.schedule(at, [st, r]() { st->issue(r); });
    }
    spawned = std::max(spawned, target);
  }

  cluster.run_to_completion(bench_end + kHour);

  ElasticityBenchResult out;
  out.failed_gets = st->failed;
  for (size_t i = 0; i < nsteps; i++) {
    ElasticityStepResult step;
    step.readers = opt.steps[i];
    step.completed = st->completed[i];
    step.throughput_rps = static_cast<double>(st->completed[i]) * 1e6 /
                          static_cast<double>(opt.step_duration);
    if (!st->latencies[i].empty()) {
      std::sort(st->latencies[i].begin(), st->latencies[i].end());
      step.p50 = percentile_sorted(st->latencies[i], 50);
      step.p90 = percentile_sorted(st->latencies[i], 90);
    }
    out.steps.push_back(step);
  }
  for (size_t i = 0; i < cluster.daemon_count(); i++) {
    out.scale_outs += cluster.daemon(i).counters().scale_outs;
    out.demand_cache_loads += cluster.daemon(i).counters().demand_cache_loads;
  }
  return out;
}

std::string ElasticityBenchResult::csv() const {
  std::string out = "readers,completed,throughput_rps,p50_us,p90_us\n";
  for (const auto& s : steps) {
    out += std::to_string(s.readers);
    out += ',' + std::to_string(s.completed);
    out += ',' + fmt_double(s.throughput_rps);
    out += ',' + std::to_string(s.p50);
    out += ',' + std::to_string(s.p90);
    out += '\n';
  }
  return out;
}

std::string ElasticityBenchResult::to_text() const {
  std::string out = csv();
  out += "failed_gets: " + std::to_string(failed_gets) + "\n";
  out += "scale_outs: " + std::to_string(scale_outs) + "\n";
  out += "demand_cache_loads: " + std::to_string(demand_cache_loads) + "\n";
  return out;
}

}  // namespace smstore
