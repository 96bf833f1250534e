#pragma once

#include <cstdint>
#include <string>

namespace smstore {

// Money as a fixed-point count of picodollars (1e-12 USD). Integer arithmetic
// end to end: totals are exact sums of per-event charges and category
// subtotals always add up to the grand total with no float drift.
struct Money {
  int64_t pico = 0;

  constexpr Money() = default;
  constexpr explicit Money(int64_t p) : pico(p) {}

  static constexpr Money zero() { return Money(0); }
  static constexpr Money from_pico(int64_t p) { return Money(p); }
  // For config-file rates expressed in dollars; rounds to nearest picodollar.
  static Money from_dollars(double d);

  double dollars() const { return static_cast<double>(pico) * 1e-12; }
  // Decimal dollars with full 12-digit fraction, e.g. "0.000002500005".
  std::string to_string() const;

  constexpr Money operator+(Money o) const { return Money(pico + o.pico); }
  constexpr Money operator-(Money o) const { return Money(pico - o.pico); }
  Money& operator+=(Money o) {
    pico += o.pico;
    return *this;
  }
  constexpr bool operator==(const Money&) const = default;
  constexpr auto operator<=>(const Money&) const = default;
};

// rate * memory_bytes * billed_ms, with GB = 2^30 bytes and 1000 ms/s.
// 128-bit intermediate, result truncated toward zero to whole picodollars.
Money gb_second_charge(Money per_gb_second, uint64_t memory_bytes, int64_t billed_ms);

// rate * byte_microseconds, prorating a per-GB-month rate (month = 30 days).
Money gb_month_charge(Money per_gb_month, __int128 byte_microseconds);

}  // namespace smstore
