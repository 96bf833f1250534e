#include "smstore/money.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace smstore {

Money Money::from_dollars(double d) {
  return Money(static_cast<int64_t>(std::llround(d * 1e12)));
}

std::string Money::to_string() const {
  int64_t v = pico;
  const char* sign = "";
  if (v < 0) {
    sign = "-";
    v = -v;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s%lld.%012lld", sign,
                static_cast<long long>(v / 1000000000000ll),
                static_cast<long long>(v % 1000000000000ll));
  return buf;
}

Money gb_second_charge(Money per_gb_second, uint64_t memory_bytes, int64_t billed_ms) {
  // pico$ * bytes * ms / (2^30 bytes/GB * 1000 ms/s)
  __int128 num = static_cast<__int128>(per_gb_second.pico) * memory_bytes * billed_ms;
  __int128 den = (static_cast<__int128>(1) << 30) * 1000;
  return Money(static_cast<int64_t>(num / den));
}

Money gb_month_charge(Money per_gb_month, __int128 byte_microseconds) {
  constexpr __int128 us_per_month = static_cast<__int128>(30) * 24 * 3600 * 1000000;
  __int128 num = static_cast<__int128>(per_gb_month.pico) * byte_microseconds;
  __int128 den = (static_cast<__int128>(1) << 30) * us_per_month;
  return Money(static_cast<int64_t>(num / den));
}

}  // namespace smstore
