#include "smstore/erasure.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <map>

namespace smstore {
namespace {

// GF(2^8) log/exp tables for the 0x11D field, built once.
struct Gf256 {
  std::array<uint8_t, 256> log{};
  std::array<uint8_t, 512> exp{};

  Gf256() {
    uint32_t x = 1;
    for (int i = 0; i < 255; i++) {
      exp[i] = static_cast<uint8_t>(x);
      log[x] = static_cast<uint8_t>(i);
      x <<= 1;
      if (x & 0x100) x ^= 0x11D;
    }
    for (int i = 255; i < 512; i++) exp[i] = exp[i - 255];
  }

  uint8_t mul(uint8_t a, uint8_t b) const {
    if (a == 0 || b == 0) return 0;
    return exp[log[a] + log[b]];
  }
  uint8_t inv(uint8_t a) const { return exp[255 - log[a]]; }
};

const Gf256& gf() {
  static const Gf256 t;
  return t;
}

// dst ^= src * c over a byte range.
void mul_acc(uint8_t* dst, const uint8_t* src, size_t n, uint8_t c) {
  if (c == 0) return;
  const Gf256& t = gf();
  if (c == 1) {
    for (size_t i = 0; i < n; i++) dst[i] ^= src[i];
    return;
  }
  const uint8_t lc = t.log[c];
  for (size_t i = 0; i < n; i++) {
    uint8_t s = src[i];
    if (s) dst[i] ^= t.exp[t.log[s] + lc];
  }
}

// Parity coefficient for parity row r (0-based), data column j.
uint8_t cauchy_coeff(uint32_t r, uint32_t j, const ECConfig& cfg) {
  return gf().inv(static_cast<uint8_t>(r ^ (cfg.p + j)));
}

// Copies stripe `row` of the source into dst, zero padding the tail.
void load_stripe(uint8_t* dst, const Blob& data, uint64_t stripe, uint32_t row) {
  uint64_t begin = stripe * row;
  uint64_t end = std::min<uint64_t>(begin + stripe, data.size());
  if (begin >= data.size()) {
    std::memset(dst, 0, stripe);
    return;
  }
  uint64_t n = end - begin;
  std::memcpy(dst, data.data() + begin, n);
  if (n < stripe) std::memset(dst + n, 0, stripe - n);
}

// Invert an n x n GF(256) matrix in place (Gauss-Jordan). The caller
// guarantees invertibility (Cauchy construction), so a zero pivot means a
// programming error, not bad input.
std::vector<uint8_t> invert(std::vector<uint8_t> m, uint32_t n) {
  const Gf256& t = gf();
  std::vector<uint8_t> inv(n * n, 0);
  for (uint32_t i = 0; i < n; i++) inv[i * n + i] = 1;
  for (uint32_t col = 0; col < n; col++) {
    uint32_t piv = col;
    while (piv < n && m[piv * n + col] == 0) piv++;
    if (piv == n) throw CorruptChunkError("singular decode matrix");
    if (piv != col) {
      for (uint32_t j = 0; j < n; j++) {
        std::swap(m[piv * n + j], m[col * n + j]);
        std::swap(inv[piv * n + j], inv[col * n + j]);
      }
    }
    uint8_t pinv = t.inv(m[col * n + col]);
    for (uint32_t j = 0; j < n; j++) {
      m[col * n + j] = t.mul(m[col * n + j], pinv);
      inv[col * n + j] = t.mul(inv[col * n + j], pinv);
    }
    for (uint32_t row = 0; row < n; row++) {
      if (row == col) continue;
      uint8_t f = m[row * n + col];
      if (f == 0) continue;
      for (uint32_t j = 0; j < n; j++) {
        m[row * n + j] ^= t.mul(m[col * n + j], f);
        inv[row * n + j] ^= t.mul(inv[col * n + j], f);
      }
    }
  }
  return inv;
}

}  // namespace

std::vector<Blob> ec_encode(const Blob& data, const ECConfig& cfg) {
  cfg.validate();
  const uint64_t stripe = ec_stripe_len(data.size(), cfg);
  std::vector<Blob> out;
  out.reserve(cfg.total());

  if (cfg.d == 1 && cfg.p == 0) {
    out.push_back(data);  // identity layout, no copy
    return out;
  }

  // Data stripes. The last stripe may need padding, in which case it is the
  // only one copied; full interior stripes alias the source buffer.
  for (uint32_t j = 0; j < cfg.d; j++) {
    uint64_t begin = stripe * j;
    if (begin + stripe <= data.size()) {
      out.push_back(data.view(begin, stripe));
    } else {
      std::vector<uint8_t> s(stripe);
      load_stripe(s.data(), data, stripe, j);
      out.push_back(Blob::take(std::move(s)));
    }
  }

  // Parity rows.
  for (uint32_t r = 0; r < cfg.p; r++) {
    std::vector<uint8_t> row(stripe, 0);
    for (uint32_t j = 0; j < cfg.d; j++) {
      mul_acc(row.data(), out[j].data(), stripe, cauchy_coeff(r, j, cfg));
    }
    out.push_back(Blob::take(std::move(row)));
  }
  return out;
}

Blob ec_decode(const std::vector<std::pair<uint32_t, Blob>>& chunks, const ECConfig& cfg,
               uint64_t original_size) {
  cfg.validate();
  const uint64_t stripe = ec_stripe_len(original_size, cfg);

  std::map<uint32_t, Blob> have;  // distinct ids, deterministic order
  for (const auto& [id, payload] : chunks) {
    if (id >= cfg.total()) throw CorruptChunkError("chunk id out of range");
    if (payload.size() != stripe) {
      throw CorruptChunkError("chunk payload size does not match stripe length");
    }
    have.emplace(id, payload);
  }
  if (have.size() < cfg.d) {
    throw InsufficientChunksError("need " + std::to_string(cfg.d) + " distinct chunks, have " +
                                  std::to_string(have.size()));
  }

  // Fast path: all data rows present.
  bool all_data = true;
  for (uint32_t j = 0; j < cfg.d; j++) {
    if (!have.count(j)) {
      all_data = false;
      break;
    }
  }

  std::vector<Blob> rows(cfg.d);
  if (all_data) {
    for (uint32_t j = 0; j < cfg.d; j++) rows[j] = have[j];
  } else {
    // Pick d rows: every available data row plus parity rows to fill.
    std::vector<uint32_t> picked;
    for (uint32_t j = 0; j < cfg.d && picked.size() < cfg.d; j++) {
      if (have.count(j)) picked.push_back(j);
    }
    for (uint32_t r = cfg.d; r < cfg.total() && picked.size() < cfg.d; r++) {
      if (have.count(r)) picked.push_back(r);
    }

    // Generator submatrix for the picked rows.
    std::vector<uint8_t> m(static_cast<size_t>(cfg.d) * cfg.d, 0);
    for (uint32_t i = 0; i < cfg.d; i++) {
      uint32_t id = picked[i];
      if (id < cfg.d) {
        m[i * cfg.d + id] = 1;
      } else {
        for (uint32_t j = 0; j < cfg.d; j++) {
          m[i * cfg.d + j] = cauchy_coeff(id - cfg.d, j, cfg);
        }
      }
    }
    std::vector<uint8_t> inv = invert(std::move(m), cfg.d);

    // Reconstruct only the missing data rows; present ones pass through.
    for (uint32_t j = 0; j < cfg.d; j++) {
      if (have.count(j)) {
        rows[j] = have[j];
        continue;
      }
      std::vector<uint8_t> rec(stripe, 0);
      for (uint32_t i = 0; i < cfg.d; i++) {
        mul_acc(rec.data(), have[picked[i]].data(), stripe, inv[j * cfg.d + i]);
      }
      rows[j] = Blob::take(std::move(rec));
    }
  }

  if (cfg.d == 1) {
    return original_size == rows[0].size() ? rows[0] : rows[0].view(0, original_size);
  }
  std::vector<uint8_t> out(original_size);
  uint64_t off = 0;
  for (uint32_t j = 0; j < cfg.d && off < original_size; j++) {
    uint64_t n = std::min<uint64_t>(stripe, original_size - off);
    std::memcpy(out.data() + off, rows[j].data(), n);
    off += n;
  }
  return Blob::take(std::move(out));
}

}  // namespace smstore
