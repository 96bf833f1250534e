#include "smstore/chunking.hpp"

#include <algorithm>

namespace smstore {

std::vector<Blob> split_large(const Blob& data, const LargeObjectBounds& bounds) {
  bounds.validate();
  std::vector<Blob> pieces;
  if (data.size() <= bounds.upper_bound) {
    pieces.push_back(data);
    return pieces;
  }
  uint64_t off = 0;
  while (off < data.size()) {
    uint64_t n = std::min<uint64_t>(bounds.lower_bound, data.size() - off);
    pieces.push_back(data.view(off, n));
    off += n;
  }
  return pieces;
}

}  // namespace smstore
