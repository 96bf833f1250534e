#include "smstore/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>

namespace smstore {

uint64_t payload_seed(const ObjectKey& key, uint64_t size) {
  Hasher h;
  h.update_bytes(key.name());
  h.update_u64(size);
  return h.digest();
}

Blob make_payload(const ObjectKey& key, uint64_t size) {
  std::vector<uint8_t> buf(size);
  fill_pseudorandom(buf, payload_seed(key, size));
  return Blob::take(std::move(buf));
}

LatencySummary summarize_latencies(std::vector<VirtualDuration>& samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  s.p50 = percentile_sorted(samples, 50);
  s.p90 = percentile_sorted(samples, 90);
  s.p95 = percentile_sorted(samples, 95);
  s.p99 = percentile_sorted(samples, 99);
  s.max = samples.back();
  long double sum = 0;
  for (VirtualDuration v : samples) sum += static_cast<long double>(v);
  s.mean_us = static_cast<double>(sum / static_cast<long double>(samples.size()));
  return s;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string latency_row(const char* op, const LatencySummary& s) {
  std::string out = op;
  out += ',' + std::to_string(s.count);
  out += ',' + std::to_string(s.p50);
  out += ',' + std::to_string(s.p90);
  out += ',' + std::to_string(s.p95);
  out += ',' + std::to_string(s.p99);
  out += ',' + std::to_string(s.max);
  out += ',' + fmt_double(s.mean_us);
  out += '\n';
  return out;
}

}  // namespace

RunReport replay_trace(Cluster& cluster, const std::vector<TraceRecord>& trace,
                       const ReplayOptions& opt) {
  if (opt.speed <= 0) throw ConfigError("replay: speed must be > 0");
  cluster.start();
  Engine& eng = cluster.engine();
  Client& client = cluster.client();

  struct Shared {
    RunReport report;
    std::vector<VirtualDuration> put_lat, get_lat;
    std::map<std::string, uint64_t> reference;  // key -> latest submitted PUT size
    std::vector<uint8_t> scratch;
    bool verify = true;
  };
  auto sh = std::make_shared<Shared>();
  sh->verify = opt.verify;

  VirtualTime t0 = eng.now();
  auto at_of = [&](uint64_t ts_ms) {
    return t0 + static_cast<VirtualDuration>(
                    std::llround(static_cast<double>(ts_ms) * 1000.0 / opt.speed));
  };

  for (const auto& rec : trace) {
    if (rec.op == TraceOp::put) {
      eng.schedule(at_of(rec.timestamp_ms), [sh, &client, key = rec.key, size = rec.size]() {
        ObjectKey k(key);
        sh->reference[key] = size;
        client.submit_put(k, make_payload(k, size), [sh](PutAck ack) {
          sh->report.puts++;
          if (!ack.ok) {
            sh->report.put_failures++;
          } else {
            sh->put_lat.push_back(ack.completed_at - ack.submitted_at);
          }
        });
      });
    } else {
      eng.schedule(at_of(rec.timestamp_ms), [sh, &client, key = rec.key]() {
        std::optional<uint64_t> expect;
        auto it = sh->reference.find(key);
        if (it != sh->reference.end()) expect = it->second;
        client.submit_get(ObjectKey(key), [sh, key, expect](GetResult res) {
          sh->report.gets++;
          if (!res.ok) {
            // a GET of a never-put key is expected to fail; anything else is
            // a lost object
            if (expect) sh->report.get_failures++;
            return;
          }
          sh->get_lat.push_back(res.completed_at - res.submitted_at);
          if (!sh->verify || !expect) return;
          bool match = res.payload.size() == *expect;
          if (match && *expect) {
            sh->scratch.resize(*expect);
            fill_pseudorandom(sh->scratch, payload_seed(ObjectKey(key), *expect));
            match = std::memcmp(sh->scratch.data(), res.payload.data(), *expect) == 0;
          }
          if (!match) {
            sh->report.verify_failures++;
            throw VerificationError("GET returned wrong bytes for key: " + key);
          }
          sh->report.verified_gets++;
        });
      });
    }
  }

  VirtualTime last = trace.empty() ? t0 : at_of(trace.back().timestamp_ms);
  cluster.run_to_completion(last + opt.settle_grace);

  RunReport rep = std::move(sh->report);
  rep.put_latency = summarize_latencies(sh->put_lat);
  rep.get_latency = summarize_latencies(sh->get_lat);

  HitStats hits = cluster.total_hits();
  rep.chunk_hits = hits.hits();
  rep.chunk_total = hits.total();
  rep.hit_ratio = hits.hit_ratio();

  const CostLedger& ledger = cluster.ledger();
  rep.cost_io = ledger.total(CostCategory::io);
  rep.cost_recovery = ledger.total(CostCategory::recovery);
  rep.cost_warmup = ledger.total(CostCategory::warmup);
  rep.cost_cos = ledger.total(CostCategory::cos);
  rep.cost_total = ledger.grand_total();
  rep.cost_csv = ledger.report_csv(static_cast<VirtualDuration>(opt.report_interval_ms) *
                                   kMillisecond);

  for (size_t i = 0; i < cluster.daemon_count(); i++) {
    const DaemonCounters& c = cluster.daemon(i).counters();
    rep.counters.puts += c.puts;
    rep.counters.gets += c.gets;
    rep.counters.chunk_reads += c.chunk_reads;
    rep.counters.scale_outs += c.scale_outs;
    rep.counters.lazy_migrations += c.lazy_migrations;
    rep.counters.ondemand_migrations += c.ondemand_migrations;
    rep.counters.demand_cache_loads += c.demand_cache_loads;
    rep.counters.warmup_pings += c.warmup_pings;
    rep.counters.failures_detected += c.failures_detected;
    rep.counters.retired_functions += c.retired_functions;
  }

  struct Row {
    VirtualTime at;
    size_t daemon;
    FnSample s;
  };
  std::vector<Row> rows;
  for (size_t i = 0; i < cluster.daemon_count(); i++) {
    for (const FnSample& s : cluster.daemon(i).samples()) rows.push_back({s.at, i, s});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.at != b.at) return a.at < b.at;
    return a.daemon < b.daemon;
  });
  rep.functions_csv = "time_ms,daemon,deployments,live,serving,degraded,recovering\n";
  for (const Row& r : rows) {
    rep.functions_csv += std::to_string(r.at / kMillisecond);
    rep.functions_csv += ',' + std::to_string(r.daemon);
    rep.functions_csv += ',' + std::to_string(r.s.deployments);
    rep.functions_csv += ',' + std::to_string(r.s.live_instances);
    rep.functions_csv += ',' + std::to_string(r.s.serving);
    rep.functions_csv += ',' + std::to_string(r.s.degraded);
    rep.functions_csv += ',' + std::to_string(r.s.recovering);
    rep.functions_csv += '\n';
  }

  rep.latency_csv = "op,count,p50_us,p90_us,p95_us,p99_us,max_us,mean_us\n";
  rep.latency_csv += latency_row("put", rep.put_latency);
  rep.latency_csv += latency_row("get", rep.get_latency);
  return rep;
}

std::string RunReport::to_text() const {
  std::string out;
  out += "puts: " + std::to_string(puts) + "\n";
  out += "put_failures: " + std::to_string(put_failures) + "\n";
  out += "gets: " + std::to_string(gets) + "\n";
  out += "get_failures: " + std::to_string(get_failures) + "\n";
  out += "verified_gets: " + std::to_string(verified_gets) + "\n";
  out += "chunk_hits: " + std::to_string(chunk_hits) + "\n";
  out += "chunk_reads: " + std::to_string(chunk_total) + "\n";
  out += "hit_ratio: " + (hit_ratio ? fmt_double(*hit_ratio) : std::string("n/a")) + "\n";
  out += "put_p50_us: " + std::to_string(put_latency.p50) + "\n";
  out += "put_p99_us: " + std::to_string(put_latency.p99) + "\n";
  out += "get_p50_us: " + std::to_string(get_latency.p50) + "\n";
  out += "get_p99_us: " + std::to_string(get_latency.p99) + "\n";
  out += "cost_io: " + cost_io.to_string() + "\n";
  out += "cost_recovery: " + cost_recovery.to_string() + "\n";
  out += "cost_warmup: " + cost_warmup.to_string() + "\n";
  out += "cost_cos: " + cost_cos.to_string() + "\n";
  out += "cost_total: " + cost_total.to_string() + "\n";
  out += "scale_outs: " + std::to_string(counters.scale_outs) + "\n";
  out += "lazy_migrations: " + std::to_string(counters.lazy_migrations) + "\n";
  out += "ondemand_migrations: " + std::to_string(counters.ondemand_migrations) + "\n";
  out += "demand_cache_loads: " + std::to_string(counters.demand_cache_loads) + "\n";
  out += "warmup_pings: " + std::to_string(counters.warmup_pings) + "\n";
  out += "failures_detected: " + std::to_string(counters.failures_detected) + "\n";
  out += "retired_functions: " + std::to_string(counters.retired_functions) + "\n";
  return out;
}

}  // namespace smstore
