#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "smstore/bytes.hpp"
#include "smstore/keys.hpp"
#include "smstore/metering.hpp"
#include "smstore/money.hpp"
#include "smstore/vtime.hpp"

namespace smstore {

// Namespaced object-store key. Flat encoding (injective, documented):
//   chunk:    "c/<lowercase hex of key bytes>/<piece_id>/<chunk_id>"
//   log node: "l/<id_lambda>/<term as %016x>"
//   snapshot: "s/<id_lambda>/<seq as %016x>"
// Terms and snapshot sequence numbers are zero-padded hex so lexicographic
// listing order equals numeric order.
struct CosKey {
  std::string flat;

  static CosKey chunk(const ObjectKey& key, uint32_t piece_id, uint32_t chunk_id);
  static CosKey chunk(const ChunkRef& ref) { return chunk(ref.key, ref.piece_id, ref.chunk_id); }
  static CosKey log_node(uint64_t id_lambda, uint64_t term);
  static CosKey snapshot(uint64_t id_lambda, uint64_t seq);

  static std::string log_prefix(uint64_t id_lambda);
  static std::string snapshot_prefix(uint64_t id_lambda);
  // Term / seq parsed back out of a flat log/snapshot key.
  static uint64_t trailing_hex(const std::string& flat);

  auto operator<=>(const CosKey&) const = default;
};

// Storage backend: durable key -> bytes, with prefix listing.
class CosBackend {
 public:
  virtual ~CosBackend() = default;
  virtual void put(const std::string& flat, const Blob& data) = 0;
  virtual Blob get(const std::string& flat) = 0;  // NotFoundError if absent
  virtual bool exists(const std::string& flat) = 0;
  virtual std::vector<std::string> list(const std::string& prefix) = 0;  // sorted
  virtual uint64_t stored_bytes() const = 0;
};

std::unique_ptr<CosBackend> make_memory_backend();
// Persists each object as one file under `root`, fanned out by key hash.
std::unique_ptr<CosBackend> make_filesystem_backend(const std::string& root);

struct CosRates {
  Money per_request = Money::from_pico(400000);          // $0.0000004
  Money per_gb_month = Money::from_pico(23000000000ll);  // $0.023
};

struct CosLatency {
  VirtualDuration base = 20 * kMillisecond;   // per request
  uint64_t bytes_per_sec = 25ull << 20;       // transfer bandwidth
};

struct CosCounters {
  uint64_t puts = 0, gets = 0, lists = 0;
  uint64_t bytes_in = 0, bytes_out = 0;
};

// Billed, latency-modeled facade over a backend. Callers add the returned
// virtual latency to whatever invocation issued the request; request fees and
// storage rent go to the shared ledger under the `cos` category.
class CosStore {
 public:
  CosStore(std::unique_ptr<CosBackend> backend, CosRates rates, CosLatency latency,
           CostLedger* ledger)
      : backend_(std::move(backend)), rates_(rates), latency_(latency), ledger_(ledger) {}

  VirtualDuration put(const CosKey& key, const Blob& data, VirtualTime now);
  std::pair<Blob, VirtualDuration> get(const CosKey& key, VirtualTime now);
  bool exists(const CosKey& key) const { return backend_->exists(key.flat); }
  std::pair<std::vector<std::string>, VirtualDuration> list(const std::string& prefix,
                                                            VirtualTime now);

  // Posts accrued storage rent (per-GB-month, prorated per byte-microsecond)
  // up to `now`. Fractional picodollars carry to the next posting.
  void post_storage_rent(VirtualTime now);

  uint64_t stored_bytes() const { return backend_->stored_bytes(); }
  const CosCounters& counters() const { return counters_; }
  VirtualDuration transfer_latency(uint64_t bytes) const;

 private:
  void accrue_locked(VirtualTime now);

  std::unique_ptr<CosBackend> backend_;
  CosRates rates_;
  CosLatency latency_;
  CostLedger* ledger_;
  CosCounters counters_;
  mutable std::mutex mu_;
  VirtualTime accrued_until_ = 0;
  __int128 rent_carry_num_ = 0;  // rate_pico * byte_us, pending division
};

}  // namespace smstore
