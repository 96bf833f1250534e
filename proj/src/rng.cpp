#include "smstore/rng.hpp"

#include <cmath>
#include <cstring>

#include "smstore/hash.hpp"

namespace smstore {
namespace {

inline uint64_t splitmix_next(uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

uint64_t Rng::next_u64() { return splitmix_next(state_); }

uint64_t Rng::bounded(uint64_t n) { return next_u64() % n; }

double Rng::next_double() {
  // 53 high bits -> [0, 1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::exponential(double mean) {
  double u = next_double();
  return -mean * std::log1p(-u);
}

Rng Rng::fork(uint64_t tag) const {
  Hasher h;
  h.update_u64(state_);
  h.update_u64(tag);
  return Rng(h.digest());
}

void fill_pseudorandom(std::span<uint8_t> out, uint64_t seed) {
  uint64_t s = seed;
  size_t n = out.size();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    uint64_t v = splitmix_next(s);
    std::memcpy(out.data() + i, &v, 8);
  }
  if (i < n) {
    uint64_t v = splitmix_next(s);
    std::memcpy(out.data() + i, &v, n - i);
  }
}

}  // namespace smstore
