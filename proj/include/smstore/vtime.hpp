#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

namespace smstore {

// Virtual time in microseconds since simulation start. The clock only moves
// when the event engine fires an event; nothing reads wall time.
using VirtualTime = int64_t;
using VirtualDuration = int64_t;

constexpr VirtualDuration kMicrosecond = 1;
constexpr VirtualDuration kMillisecond = 1000;
constexpr VirtualDuration kSecond = 1000 * kMillisecond;
constexpr VirtualDuration kMinute = 60 * kSecond;
constexpr VirtualDuration kHour = 60 * kMinute;

// Duration rounded up to whole milliseconds (billing granularity).
inline int64_t ceil_ms(VirtualDuration us) { return (us + kMillisecond - 1) / kMillisecond; }
inline int64_t floor_ms(VirtualTime us) { return us / kMillisecond; }

// "12.345" style milliseconds with 3 decimals, for reports.
inline std::string format_ms(VirtualDuration us) {
  char buf[32];
  long long ms = us / kMillisecond;
  long long frac = us % kMillisecond;
  if (frac < 0) frac = -frac;
  std::snprintf(buf, sizeof(buf), "%lld.%03lld", ms, frac);
  return buf;
}

class VirtualClock {
 public:
  VirtualTime now() const { return now_; }
  void advance_to(VirtualTime t) {
    if (t > now_) now_ = t;
  }

 private:
  VirtualTime now_ = 0;
};

}  // namespace smstore
