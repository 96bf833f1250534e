#include "smstore/bytes.hpp"

#include <stdexcept>

namespace smstore {

Blob Blob::view(size_t off, size_t len) const {
  if (off > len_ || len > len_ - off) {
    throw std::out_of_range("Blob::view out of range");
  }
  return Blob(buf_, off_ + off, len);
}

}  // namespace smstore
