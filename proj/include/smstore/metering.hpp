#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "smstore/money.hpp"
#include "smstore/vtime.hpp"

namespace smstore {

// Where a charge came from. Every billed event lands in exactly one bucket.
enum class CostCategory : uint8_t {
  io = 0,        // invocations serving client PUT/GET traffic (incl. migration)
  recovery = 1,  // recovery transfers and helper engagements
  warmup = 2,    // keep-alive pings
  cos = 3,       // object-store requests and storage rent
};
constexpr size_t kCostCategories = 4;
const char* cost_category_name(CostCategory c);

struct LedgerEntry {
  VirtualTime at = 0;
  CostCategory category = CostCategory::io;
  Money amount;
  std::string cause;  // short tag like "put", "get", "shard-fetch"
};

// Append-only cost log. Totals are integer sums of entries, so the category
// breakdown always reconciles with the grand total exactly.
class CostLedger {
 public:
  void charge(VirtualTime at, CostCategory category, Money amount, std::string cause);

  Money total(CostCategory category) const;
  Money grand_total() const;
  size_t entry_count() const;
  std::vector<LedgerEntry> entries() const;  // snapshot copy

  // Per-interval CSV: header then one row per interval from the first entry
  // (or t=0) through the last, inclusive: interval_start_ms,io,recovery,
  // warmup,cos,total. Amounts are decimal dollars with 12 fraction digits.
  std::string report_csv(VirtualDuration interval) const;

 private:
  mutable std::mutex mu_;
  std::vector<LedgerEntry> entries_;
  std::array<int64_t, kCostCategories> totals_{};
};

// Memory-hit tracking for chunk reads: a hit is a read served from function
// instance memory without waiting on an object-store fetch.
class HitStats {
 public:
  void record(bool hit) {
    total_++;
    if (hit) hits_++;
  }
  void merge(const HitStats& other) {
    hits_ += other.hits_;
    total_ += other.total_;
  }
  uint64_t hits() const { return hits_; }
  uint64_t total() const { return total_; }
  // Empty when no reads were recorded (ratio undefined, never NaN).
  std::optional<double> hit_ratio() const {
    if (total_ == 0) return std::nullopt;
    return static_cast<double>(hits_) / static_cast<double>(total_);
  }

 private:
  uint64_t hits_ = 0;
  uint64_t total_ = 0;
};

}  // namespace smstore
