#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smstore {

// Immutable, cheaply copyable byte buffer. Copies share the underlying
// storage; view() carves out an aliasing sub-range without copying bytes.
// All payload plumbing uses Blob so a chunk held by a function instance,
// the object store and an in-flight response are the same allocation.
class Blob {
 public:
  Blob() = default;

  static Blob copy_of(const void* data, size_t n) {
    auto buf = std::make_shared<std::vector<uint8_t>>(n);
    if (n) std::memcpy(buf->data(), data, n);
    return Blob(std::move(buf), 0, n);
  }
  static Blob from_string(std::string_view s) { return copy_of(s.data(), s.size()); }
  static Blob take(std::vector<uint8_t>&& bytes) {
    size_t n = bytes.size();
    return Blob(std::make_shared<std::vector<uint8_t>>(std::move(bytes)), 0, n);
  }

  // Aliasing view over [off, off+len). Bounds-checked.
  Blob view(size_t off, size_t len) const;

  const uint8_t* data() const {
    return buf_ ? buf_->data() + off_ : reinterpret_cast<const uint8_t*>("");
  }
  size_t size() const { return len_; }
  bool empty() const { return len_ == 0; }
  std::span<const uint8_t> span() const { return {data(), len_}; }
  std::string_view str() const { return {reinterpret_cast<const char*>(data()), len_}; }

  bool operator==(const Blob& o) const {
    return len_ == o.len_ && (len_ == 0 || std::memcmp(data(), o.data(), len_) == 0);
  }

 private:
  Blob(std::shared_ptr<const std::vector<uint8_t>> buf, size_t off, size_t len)
      : buf_(std::move(buf)), off_(off), len_(len) {}

  std::shared_ptr<const std::vector<uint8_t>> buf_;
  size_t off_ = 0;
  size_t len_ = 0;
};

}  // namespace smstore
