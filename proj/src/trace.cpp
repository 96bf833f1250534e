#include "smstore/trace.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "smstore/hash.hpp"
#include "smstore/rng.hpp"

namespace smstore {

const char* trace_op_name(TraceOp op) { return op == TraceOp::put ? "PUT" : "GET"; }

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_line(size_t line_no, const std::string& why) {
  throw ParseError("trace line " + std::to_string(line_no) + ": " + why);
}

uint64_t parse_u64(const std::string& field, size_t line_no, const char* what) {
  if (field.empty()) bad_line(line_no, std::string(what) + " is empty");
  uint64_t v = 0;
  for (char c : field) {
    if (c < '0' || c > '9') bad_line(line_no, std::string(what) + " is not a number: " + field);
    uint64_t d = static_cast<uint64_t>(c - '0');
    if (v > (UINT64_MAX - d) / 10) bad_line(line_no, std::string(what) + " overflows");
    v = v * 10 + d;
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::vector<TraceRecord> parse_trace_text(const std::string& text) {
  std::vector<TraceRecord> out;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  uint64_t prev_ts = 0;
  while (std::getline(in, line)) {
    line_no++;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;

    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      size_t comma = t.find(',', start);
      fields.push_back(trim(t.substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (fields.size() < 3 || fields.size() > 4) {
      bad_line(line_no, "expected timestamp_ms,op,key,size");
    }

    TraceRecord rec;
    rec.timestamp_ms = parse_u64(fields[0], line_no, "timestamp");
    std::string op = fields[1];
    std::transform(op.begin(), op.end(), op.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    if (op == "PUT") {
      rec.op = TraceOp::put;
    } else if (op == "GET") {
      rec.op = TraceOp::get;
    } else {
      bad_line(line_no, "op must be PUT or GET, got: " + fields[1]);
    }
    if (fields[2].empty()) bad_line(line_no, "key is empty");
    if (fields[2].size() > kMaxKeyBytes) bad_line(line_no, "key exceeds 1024 bytes");
    rec.key = fields[2];
    if (fields.size() == 4 && !fields[3].empty()) {
      rec.size = parse_u64(fields[3], line_no, "size");
    }
    if (rec.op == TraceOp::put && rec.size == 0) bad_line(line_no, "PUT requires size >= 1");
    if (rec.timestamp_ms < prev_ts) bad_line(line_no, "timestamps must be non-decreasing");
    prev_ts = rec.timestamp_ms;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TraceRecord> parse_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trace file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace_text(buf.str());
}

std::string trace_to_text(const std::vector<TraceRecord>& records) {
  std::string out = "# timestamp_ms,op,key,size\n";
  for (const auto& r : records) {
    out += std::to_string(r.timestamp_ms);
    out += ',';
    out += trace_op_name(r.op);
    out += ',';
    out += r.key;
    out += ',';
    if (r.size || r.op == TraceOp::put) out += std::to_string(r.size);
    out += '\n';
  }
  return out;
}

void write_trace(const std::string& path, const std::vector<TraceRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot write trace file: " + path);
  out << trace_to_text(records);
}

WorkloadStats analyze(const std::vector<TraceRecord>& records, uint64_t interval_ms) {
  if (interval_ms == 0) throw ConfigError("analyze: interval must be > 0");
  WorkloadStats stats;
  stats.interval_ms = interval_ms;
  stats.records = records.size();
  if (records.empty()) return stats;

  size_t intervals = static_cast<size_t>(records.back().timestamp_ms / interval_ms) + 1;
  stats.wss_timeline.assign(intervals, 0);
  stats.throughput_timeline.assign(intervals, 0.0);

  std::map<std::string, uint64_t> known_size;
  std::map<std::string, uint64_t> last_access;
  struct IatAcc {  // Welford accumulator over inter-arrival times
    uint64_t n = 0;
    double mean = 0, m2 = 0;
  };
  std::map<std::string, IatAcc> iats;

  size_t cur = 0;
  std::map<std::string, uint64_t> touched;  // key -> size charged this interval
  uint64_t interval_bytes = 0;
  auto flush_interval = [&]() {
    uint64_t wss = 0;
    for (const auto& [k, sz] : touched) wss += sz;
    stats.wss_timeline[cur] = wss;
    stats.throughput_timeline[cur] =
        static_cast<double>(interval_bytes) * 1000.0 / static_cast<double>(interval_ms);
    touched.clear();
    interval_bytes = 0;
  };

  for (const auto& r : records) {
    size_t idx = static_cast<size_t>(r.timestamp_ms / interval_ms);
    while (cur < idx) {
      flush_interval();
      cur++;
    }
    if (r.op == TraceOp::put) stats.puts++; else stats.gets++;

    uint64_t size = r.size;
    auto ks = known_size.find(r.key);
    if (size == 0 && ks != known_size.end()) size = ks->second;
    if (size != 0) known_size[r.key] = size;
    touched[r.key] = size;
    interval_bytes += size;
    stats.total_bytes += size;

    auto la = last_access.find(r.key);
    if (la != last_access.end()) {
      uint64_t gap = r.timestamp_ms - la->second;
      stats.reuse_intervals_ms.push_back(gap);
      auto& acc = iats[r.key];
      acc.n++;
      double delta = static_cast<double>(gap) - acc.mean;
      acc.mean += delta / static_cast<double>(acc.n);
      acc.m2 += delta * (static_cast<double>(gap) - acc.mean);
      la->second = r.timestamp_ms;
    } else {
      last_access.emplace(r.key, r.timestamp_ms);
    }
  }
  flush_interval();

  stats.distinct_keys = last_access.size();
  std::sort(stats.reuse_intervals_ms.begin(), stats.reuse_intervals_ms.end());
  for (const auto& [key, acc] : iats) {
    if (acc.n < 10) continue;  // too few reuses for a stable CoV
    if (acc.mean <= 0.0) {
      stats.cov_per_object[key] = 0.0;
      continue;
    }
    double var = acc.m2 / static_cast<double>(acc.n);  // population variance
    stats.cov_per_object[key] = std::sqrt(var) / acc.mean;
  }
  return stats;
}

std::string WorkloadStats::timeline_csv() const {
  std::string out = "interval_start_ms,wss_bytes,throughput_bps\n";
  for (size_t i = 0; i < wss_timeline.size(); i++) {
    out += std::to_string(i * interval_ms);
    out += ',';
    out += std::to_string(wss_timeline[i]);
    out += ',';
    out += fmt_double(throughput_timeline[i]);
    out += '\n';
  }
  return out;
}

std::string WorkloadStats::summary() const {
  std::string out;
  out += "records: " + std::to_string(records) + "\n";
  out += "puts: " + std::to_string(puts) + "\n";
  out += "gets: " + std::to_string(gets) + "\n";
  out += "distinct_keys: " + std::to_string(distinct_keys) + "\n";
  out += "total_bytes: " + std::to_string(total_bytes) + "\n";
  out += "intervals: " + std::to_string(wss_timeline.size()) + "\n";
  uint64_t peak = 0;
  for (uint64_t w : wss_timeline) peak = std::max(peak, w);
  out += "peak_wss_bytes: " + std::to_string(peak) + "\n";
  out += "reuses: " + std::to_string(reuse_intervals_ms.size()) + "\n";
  if (!reuse_intervals_ms.empty()) {
    out += "reuse_p50_ms: " + std::to_string(percentile_sorted(reuse_intervals_ms, 50)) + "\n";
    out += "reuse_p90_ms: " + std::to_string(percentile_sorted(reuse_intervals_ms, 90)) + "\n";
    out += "reuse_p99_ms: " + std::to_string(percentile_sorted(reuse_intervals_ms, 99)) + "\n";
  }
  out += "cov_objects: " + std::to_string(cov_per_object.size()) + "\n";
  if (!cov_per_object.empty()) {
    double sum = 0, lo = 0, hi = 0;
    bool first = true;
    for (const auto& [k, c] : cov_per_object) {
      sum += c;
      if (first || c < lo) lo = c;
      if (first || c > hi) hi = c;
      first = false;
    }
    out += "cov_mean: " + fmt_double(sum / static_cast<double>(cov_per_object.size())) + "\n";
    out += "cov_min: " + fmt_double(lo) + "\n";
    out += "cov_max: " + fmt_double(hi) + "\n";
  }
  return out;
}

namespace {

struct KeyPool {
  const GenSpec& spec;
  Rng size_rng;
  std::map<uint32_t, uint64_t> sizes;  // key index -> payload size
  std::vector<bool> put_done;

  KeyPool(const GenSpec& s, uint64_t tag)
      : spec(s), size_rng(Rng(s.seed).fork(tag)), put_done(s.keys + s.step_keys, false) {}

  std::string name(uint32_t idx) const {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05u", idx);
    return spec.key_prefix + buf;
  }

  uint64_t size_of(uint32_t idx) {
    auto it = sizes.find(idx);
    if (it != sizes.end()) return it->second;
    uint64_t span = spec.max_size - spec.min_size;
    uint64_t sz = spec.min_size + (span ? size_rng.bounded(span + 1) : 0);
    sizes.emplace(idx, sz);
    return sz;
  }

  TraceRecord make(uint64_t ts, uint32_t idx, Rng& op_rng) {
    TraceRecord rec;
    rec.timestamp_ms = ts;
    rec.key = name(idx);
    rec.size = size_of(idx);
    if (!put_done[idx]) {
      rec.op = TraceOp::put;
      put_done[idx] = true;
    } else {
      rec.op = op_rng.next_double() < spec.put_fraction ? TraceOp::put : TraceOp::get;
    }
    return rec;
  }
};

}  // namespace

std::vector<TraceRecord> gen_synthetic(const GenSpec& spec) {
  if (spec.rate <= 0) throw ConfigError("gen: rate must be > 0");
  if (spec.keys == 0) throw ConfigError("gen: keys must be >= 1");
  if (spec.min_size == 0 || spec.min_size > spec.max_size) {
    throw ConfigError("gen: need 1 <= min_size <= max_size");
  }
  if (spec.put_fraction < 0 || spec.put_fraction > 1) {
    throw ConfigError("gen: put_fraction must be in [0,1]");
  }
  if (spec.mode == "mixed" && spec.burst == 0) throw ConfigError("gen: burst must be >= 1");

  KeyPool pool(spec, hash64("gen-sizes"));
  Rng op_rng = Rng(spec.seed).fork(hash64("gen-ops"));
  Rng arr_rng = Rng(spec.seed).fork(hash64("gen-arrivals"));
  Rng key_rng = Rng(spec.seed).fork(hash64("gen-keys"));
  std::vector<TraceRecord> out;

  if (spec.mode == "constant") {
    uint64_t step = std::max<uint64_t>(1, static_cast<uint64_t>(std::llround(1000.0 / spec.rate)));
    uint32_t next_key = 0;
    for (uint64_t ts = 0; ts <= spec.duration_ms; ts += step) {
      out.push_back(pool.make(ts, next_key, op_rng));
      next_key = (next_key + 1) % spec.keys;
    }
  } else if (spec.mode == "poisson") {
    double mean_gap = 1000.0 / spec.rate;
    double t = 0;
    uint64_t prev = 0;
    while (true) {
      t += arr_rng.exponential(mean_gap);
      if (t > static_cast<double>(spec.duration_ms)) break;
      uint64_t ts = std::max<uint64_t>(prev, static_cast<uint64_t>(std::llround(t)));
      out.push_back(pool.make(ts, static_cast<uint32_t>(key_rng.bounded(spec.keys)), op_rng));
      prev = ts;
    }
  } else if (spec.mode == "mixed") {
    double mean_gap = static_cast<double>(spec.burst) * 1000.0 / spec.rate;
    double t = 0;
    uint64_t prev = 0;
    while (true) {
      t += arr_rng.exponential(mean_gap);
      if (t > static_cast<double>(spec.duration_ms)) break;
      uint32_t idx = static_cast<uint32_t>(key_rng.bounded(spec.keys));
      uint64_t ts = std::max<uint64_t>(prev, static_cast<uint64_t>(std::llround(t)));
      for (uint32_t i = 0; i < spec.burst && ts <= spec.duration_ms; i++) {
        out.push_back(pool.make(ts, idx, op_rng));
        prev = ts;
        ts += 1 + arr_rng.bounded(5);  // tight intra-burst spacing
      }
      t = std::max(t, static_cast<double>(prev));
    }
  } else if (spec.mode == "step") {
    uint64_t step = std::max<uint64_t>(1, static_cast<uint64_t>(std::llround(1000.0 / spec.rate)));
    uint32_t next_key = 0;
    for (uint64_t ts = 0; ts <= spec.duration_ms; ts += step) {
      uint32_t active = ts * 2 >= spec.duration_ms ? spec.keys + spec.step_keys : spec.keys;
      out.push_back(pool.make(ts, next_key % active, op_rng));
      next_key = (next_key + 1) % active;
    }
  } else {
    throw ConfigError("gen: unknown mode: " + spec.mode);
  }
  return out;
}

}  // namespace smstore
