#include "smstore/metering.hpp"

#include <algorithm>

namespace smstore {

const char* cost_category_name(CostCategory c) {
  switch (c) {
    case CostCategory::io: return "io";
    case CostCategory::recovery: return "recovery";
    case CostCategory::warmup: return "warmup";
    case CostCategory::cos: return "cos";
  }
  return "?";
}

void CostLedger::charge(VirtualTime at, CostCategory category, Money amount, std::string cause) {
  std::lock_guard lk(mu_);
  totals_[static_cast<size_t>(category)] += amount.pico;
  entries_.push_back({at, category, amount, std::move(cause)});
}

Money CostLedger::total(CostCategory category) const {
  std::lock_guard lk(mu_);
  return Money(totals_[static_cast<size_t>(category)]);
}

Money CostLedger::grand_total() const {
  std::lock_guard lk(mu_);
  int64_t sum = 0;
  for (int64_t t : totals_) sum += t;
  return Money(sum);
}

size_t CostLedger::entry_count() const {
  std::lock_guard lk(mu_);
  return entries_.size();
}

std::vector<LedgerEntry> CostLedger::entries() const {
  std::lock_guard lk(mu_);
  return entries_;
}

std::string CostLedger::report_csv(VirtualDuration interval) const {
  std::vector<LedgerEntry> snap = entries();
  std::string out = "interval_start_ms,io,recovery,warmup,cos,total\n";
  if (interval <= 0) interval = kMinute;

  VirtualTime last = 0;
  for (const auto& e : snap) last = std::max(last, e.at);
  int64_t buckets = last / interval + 1;

  std::vector<std::array<int64_t, kCostCategories>> rows(buckets);
  for (auto& r : rows) r.fill(0);
  for (const auto& e : snap) {
    rows[e.at / interval][static_cast<size_t>(e.category)] += e.amount.pico;
  }
  for (int64_t b = 0; b < buckets; b++) {
    int64_t total = 0;
    for (int64_t v : rows[b]) total += v;
    out += std::to_string(b * interval / kMillisecond);
    for (size_t c = 0; c < kCostCategories; c++) {
      out += ',';
      out += Money(rows[b][c]).to_string();
    }
    out += ',';
    out += Money(total).to_string();
    out += '\n';
  }
  return out;
}

}  // namespace smstore
