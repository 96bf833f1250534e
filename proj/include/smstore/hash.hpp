#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "smstore/bytes.hpp"

namespace smstore {

// 64-bit content hash used everywhere a stable, platform-independent digest
// is needed (payload seeds, log-node chains, recovery sharding, ring points).
// Definition: FNV-1a over the bytes (offset basis 0xcbf29ce484222325, prime
// 0x100000001b3) followed by the 64-bit avalanche finalizer
// (x ^= x>>33; x *= 0xff51afd7ed558ccd; x ^= x>>33; x *= 0xc4ceb9fe1a85ec53;
// x ^= x>>33). hash64("") == 0xefd01f60ba992926.
uint64_t hash64(const void* data, size_t n);
inline uint64_t hash64(std::string_view s) { return hash64(s.data(), s.size()); }
inline uint64_t hash64(const Blob& b) { return hash64(b.data(), b.size()); }

// Streaming variant for hashing multi-field inputs without concatenation.
// Fields are fed with explicit little-endian encodings by the caller, so a
// digest is reproducible from the documented byte layout alone.
class Hasher {
 public:
  void update(const void* data, size_t n);
  void update_u32(uint32_t v);
  void update_u64(uint64_t v);
  void update_bytes(std::string_view s) { update(s.data(), s.size()); }
  uint64_t digest() const;  // applies the finalizer; stream may continue after

 private:
  uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace smstore
