#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "smstore/bytes.hpp"

namespace smstore {

// Base for all store errors so callers can catch one family.
struct StoreError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidKeyError : StoreError {
  using StoreError::StoreError;
};
struct NotFoundError : StoreError {
  using StoreError::StoreError;
};
struct InsufficientChunksError : StoreError {
  using StoreError::StoreError;
};
struct CorruptChunkError : StoreError {
  using StoreError::StoreError;
};
struct ScaleOutError : StoreError {
  using StoreError::StoreError;
};
struct MissingLogNodeError : StoreError {
  using StoreError::StoreError;
};
struct CosError : StoreError {
  using StoreError::StoreError;
};
struct ConfigError : StoreError {
  using StoreError::StoreError;
};
struct ParseError : StoreError {
  using StoreError::StoreError;
};
struct VerificationError : StoreError {
  using StoreError::StoreError;
};

constexpr size_t kMaxKeyBytes = 1024;

// Object name: arbitrary bytes, 1..1024 long.
class ObjectKey {
 public:
  ObjectKey() = default;
  explicit ObjectKey(std::string name) : name_(std::move(name)) {
    if (name_.empty() || name_.size() > kMaxKeyBytes) {
      throw InvalidKeyError("object key must be 1..1024 bytes");
    }
  }

  const std::string& name() const { return name_; }
  auto operator<=>(const ObjectKey&) const = default;

 private:
  std::string name_;
};

// Erasure-coding shape: d data chunks + p parity chunks per piece.
struct ECConfig {
  uint32_t d = 10;
  uint32_t p = 2;

  uint32_t total() const { return d + p; }
  void validate() const {
    if (d < 1) throw ConfigError("ec: d must be >= 1");
    if (d + p > 255) throw ConfigError("ec: d + p must be <= 255");
  }
};

// Split threshold for large objects. Objects larger than upper_bound are cut
// into pieces of lower_bound bytes (last piece gets the remainder).
struct LargeObjectBounds {
  uint64_t upper_bound = 64ull << 20;
  uint64_t lower_bound = 16ull << 20;

  void validate() const {
    if (lower_bound == 0) throw ConfigError("bounds: lower_bound must be > 0");
    if (lower_bound > upper_bound) {
      throw ConfigError("bounds: lower_bound must be <= upper_bound");
    }
  }
};

// Identity of one erasure-coded chunk of one piece of one object.
struct ChunkRef {
  ObjectKey key;
  uint32_t piece_id = 0;
  uint32_t chunk_id = 0;

  auto operator<=>(const ChunkRef&) const = default;
};

struct Chunk {
  ChunkRef ref;
  Blob payload;

  uint64_t size() const { return payload.size(); }
};

}  // namespace smstore
