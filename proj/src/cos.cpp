#include "smstore/cos.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "smstore/hash.hpp"

namespace smstore {
namespace {

std::string to_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

std::string hex16(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

CosKey CosKey::chunk(const ObjectKey& key, uint32_t piece_id, uint32_t chunk_id) {
  return {"c/" + to_hex(key.name()) + "/" + std::to_string(piece_id) + "/" +
          std::to_string(chunk_id)};
}

CosKey CosKey::log_node(uint64_t id_lambda, uint64_t term) {
  return {"l/" + std::to_string(id_lambda) + "/" + hex16(term)};
}

CosKey CosKey::snapshot(uint64_t id_lambda, uint64_t seq) {
  return {"s/" + std::to_string(id_lambda) + "/" + hex16(seq)};
}

std::string CosKey::log_prefix(uint64_t id_lambda) {
  return "l/" + std::to_string(id_lambda) + "/";
}

std::string CosKey::snapshot_prefix(uint64_t id_lambda) {
  return "s/" + std::to_string(id_lambda) + "/";
}

uint64_t CosKey::trailing_hex(const std::string& flat) {
  auto pos = flat.find_last_of('/');
  return std::stoull(flat.substr(pos + 1), nullptr, 16);
}

namespace {

class MemoryBackend : public CosBackend {
 public:
  void put(const std::string& flat, const Blob& data) override {
    std::lock_guard lk(mu_);
    auto it = objects_.find(flat);
    if (it != objects_.end()) {
      bytes_ -= it->second.size();
      it->second = data;
    } else {
      objects_.emplace(flat, data);
    }
    bytes_ += data.size();
  }

  Blob get(const std::string& flat) override {
    std::lock_guard lk(mu_);
    auto it = objects_.find(flat);
    if (it == objects_.end()) throw NotFoundError("cos object not found: " + flat);
    return it->second;
  }

  bool exists(const std::string& flat) override {
    std::lock_guard lk(mu_);
    return objects_.count(flat) != 0;
  }

  std::vector<std::string> list(const std::string& prefix) override {
    std::lock_guard lk(mu_);
    std::vector<std::string> out;
    for (auto it = objects_.lower_bound(prefix); it != objects_.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      out.push_back(it->first);
    }
    return out;
  }

  uint64_t stored_bytes() const override {
    std::lock_guard lk(mu_);
    return bytes_;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, Blob> objects_;
  uint64_t bytes_ = 0;
};

// One file per object. Path: <root>/<hh>/<encoded flat key> where hh is the
// low byte of hash64(flat) in hex (256-way fan-out) and the encoding keeps
// [A-Za-z0-9._-] verbatim, everything else as %XX.
class FilesystemBackend : public CosBackend {
 public:
  explicit FilesystemBackend(std::string root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    // Rebuild the byte count and key index from whatever is already there.
    for (const auto& dir : std::filesystem::directory_iterator(root_)) {
      if (!dir.is_directory()) continue;
      for (const auto& f : std::filesystem::directory_iterator(dir.path())) {
        if (!f.is_regular_file()) continue;
        std::string flat = decode_name(f.path().filename().string());
        uint64_t n = f.file_size();
        index_[flat] = n;
        bytes_ += n;
      }
    }
  }

  void put(const std::string& flat, const Blob& data) override {
    std::lock_guard lk(mu_);
    auto p = path_of(flat);
    std::filesystem::create_directories(p.parent_path());
    auto tmp = p;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw CosError("cannot write " + tmp.string());
      out.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size()));
      if (!out) throw CosError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, p);  // atomic replace
    auto it = index_.find(flat);
    if (it != index_.end()) bytes_ -= it->second;
    index_[flat] = data.size();
    bytes_ += data.size();
  }

  Blob get(const std::string& flat) override {
    std::lock_guard lk(mu_);
    if (!index_.count(flat)) throw NotFoundError("cos object not found: " + flat);
    std::ifstream in(path_of(flat), std::ios::binary);
    if (!in) throw CosError("cannot read " + flat);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
    return Blob::take(std::move(buf));
  }

  bool exists(const std::string& flat) override {
    std::lock_guard lk(mu_);
    return index_.count(flat) != 0;
  }

  std::vector<std::string> list(const std::string& prefix) override {
    std::lock_guard lk(mu_);
    std::vector<std::string> out;
    for (auto it = index_.lower_bound(prefix); it != index_.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      out.push_back(it->first);
    }
    return out;
  }

  uint64_t stored_bytes() const override {
    std::lock_guard lk(mu_);
    return bytes_;
  }

 private:
  static bool plain(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '-';
  }

  static std::string encode_name(const std::string& flat) {
    static const char* digits = "0123456789ABCDEF";
    std::string out;
    for (char c : flat) {
      if (plain(c)) {
        out.push_back(c);
      } else {
        out.push_back('%');
        out.push_back(digits[static_cast<unsigned char>(c) >> 4]);
        out.push_back(digits[static_cast<unsigned char>(c) & 15]);
      }
    }
    return out;
  }

  static std::string decode_name(const std::string& name) {
    std::string out;
    for (size_t i = 0; i < name.size(); i++) {
      if (name[i] == '%' && i + 2 < name.size()) {
        out.push_back(static_cast<char>(std::stoi(name.substr(i + 1, 2), nullptr, 16)));
        i += 2;
      } else {
        out.push_back(name[i]);
      }
    }
    return out;
  }

  std::filesystem::path path_of(const std::string& flat) const {
    char fan[4];
    std::snprintf(fan, sizeof(fan), "%02x", static_cast<unsigned>(hash64(flat) & 0xff));
    return std::filesystem::path(root_) / fan / encode_name(flat);
  }

  std::string root_;
  mutable std::mutex mu_;
  std::map<std::string, uint64_t> index_;  // flat key -> size
  uint64_t bytes_ = 0;
};

}  // namespace

std::unique_ptr<CosBackend> make_memory_backend() { return std::make_unique<MemoryBackend>(); }

std::unique_ptr<CosBackend> make_filesystem_backend(const std::string& root) {
  return std::make_unique<FilesystemBackend>(root);
}

VirtualDuration CosStore::transfer_latency(uint64_t bytes) const {
  return latency_.base +
         static_cast<VirtualDuration>(static_cast<__int128>(bytes) * kSecond /
                                      latency_.bytes_per_sec);
}

VirtualDuration CosStore::put(const CosKey& key, const Blob& data, VirtualTime now) {
  {
    std::lock_guard lk(mu_);
    accrue_locked(now);
    backend_->put(key.flat, data);
    counters_.puts++;
    counters_.bytes_in += data.size();
  }
  ledger_->charge(now, CostCategory::cos, rates_.per_request, "cos-put");
  return transfer_latency(data.size());
}

std::pair<Blob, VirtualDuration> CosStore::get(const CosKey& key, VirtualTime now) {
  Blob b;
  {
    std::lock_guard lk(mu_);
    b = backend_->get(key.flat);
    counters_.gets++;
    counters_.bytes_out += b.size();
  }
  ledger_->charge(now, CostCategory::cos, rates_.per_request, "cos-get");
  return {b, transfer_latency(b.size())};
}

std::pair<std::vector<std::string>, VirtualDuration> CosStore::list(const std::string& prefix,
                                                                    VirtualTime now) {
  std::vector<std::string> names;
  {
    std::lock_guard lk(mu_);
    names = backend_->list(prefix);
    counters_.lists++;
  }
  ledger_->charge(now, CostCategory::cos, rates_.per_request, "cos-list");
  return {std::move(names), latency_.base};
}

void CosStore::accrue_locked(VirtualTime now) {
  if (now <= accrued_until_) return;
  __int128 byte_us = static_cast<__int128>(backend_->stored_bytes()) * (now - accrued_until_);
  rent_carry_num_ += static_cast<__int128>(rates_.per_gb_month.pico) * byte_us;
  accrued_until_ = now;
}

void CosStore::post_storage_rent(VirtualTime now) {
  Money due;
  {
    std::lock_guard lk(mu_);
    accrue_locked(now);
    constexpr __int128 us_per_month = static_cast<__int128>(30) * 24 * 3600 * 1000000;
    constexpr __int128 den = (static_cast<__int128>(1) << 30) * us_per_month;
    __int128 pico = rent_carry_num_ / den;
    rent_carry_num_ -= pico * den;
    due = Money(static_cast<int64_t>(pico));
  }
  if (due.pico > 0) ledger_->charge(now, CostCategory::cos, due, "cos-storage");
}

}  // namespace smstore
