#pragma once

#include <cstdint>
#include <span>

namespace smstore {

// Deterministic PRNG (splitmix64). Every stochastic decision in the system
// draws from an Rng forked off the run's master seed with a fixed tag, so a
// given seed always yields the same event sequence regardless of platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64();
  // Uniform in [0, n). n must be > 0.
  uint64_t bounded(uint64_t n);
  // Uniform in [0, 1).
  double next_double();
  // Exponential with the given mean (> 0).
  double exponential(double mean);
  // Independent stream derived from this one's seed and a caller tag.
  Rng fork(uint64_t tag) const;

 private:
  uint64_t state_;
};

// Fills `out` with bytes fully determined by `seed`. Used to synthesize
// object payloads (seeded by key+size) so replays can verify GET results
// without storing reference copies.
void fill_pseudorandom(std::span<uint8_t> out, uint64_t seed);

}  // namespace smstore
