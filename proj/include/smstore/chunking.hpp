#pragma once

#include <vector>

#include "smstore/bytes.hpp"
#include "smstore/keys.hpp"

namespace smstore {

// Cuts an object into pieces per the large-object policy: objects up to
// upper_bound stay whole (one piece); larger objects are cut into
// lower_bound sized pieces, the final piece taking the remainder (never
// empty). Returned blobs alias the input.
std::vector<Blob> split_large(const Blob& data, const LargeObjectBounds& bounds);

// Piece count split_large will produce for an object of `size` bytes.
inline uint64_t piece_count(uint64_t size, const LargeObjectBounds& bounds) {
  if (size <= bounds.upper_bound) return 1;
  return (size + bounds.lower_bound - 1) / bounds.lower_bound;
}

}  // namespace smstore
