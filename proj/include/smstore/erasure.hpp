#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "smstore/bytes.hpp"
#include "smstore/keys.hpp"

namespace smstore {

// Systematic Reed-Solomon over GF(2^8), reducing polynomial 0x11D.
// An object (or piece) of `size` bytes is laid out as d stripes of
// ceil(size/d) bytes (zero padded); chunk ids 0..d-1 are those stripes
// verbatim and ids d..d+p-1 are parity rows generated by a Cauchy matrix
// (row r, column j) = 1 / (x_r ^ y_j) with x_r = r, y_j = p + j. Any d of
// the d+p chunks reconstruct the original bytes.
//
// encode() returns exactly d+p blobs indexed by chunk id. With p == 0 and
// d == 1 the single chunk aliases the input without copying.
std::vector<Blob> ec_encode(const Blob& data, const ECConfig& cfg);

// Reconstructs the original `original_size` bytes from any >= d distinct
// chunks. `chunks` maps chunk_id -> payload; duplicates are ignored.
// Throws InsufficientChunksError when fewer than d distinct ids are given,
// CorruptChunkError when payload sizes disagree with the stripe length.
Blob ec_decode(const std::vector<std::pair<uint32_t, Blob>>& chunks, const ECConfig& cfg,
               uint64_t original_size);

// Stripe length used by encode/decode for an object of `size` bytes.
inline uint64_t ec_stripe_len(uint64_t size, const ECConfig& cfg) {
  return (size + cfg.d - 1) / cfg.d;
}

}  // namespace smstore
