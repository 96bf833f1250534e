#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smstore/daemon.hpp"
#include "smstore/engine.hpp"
#include "smstore/hash.hpp"

namespace smstore {

// Client library: routes each key to its owning daemon over a consistent
// hash ring (vnodes per daemon), so daemons can be added without reshuffling
// the whole keyspace. Async entry points mirror the daemon's; the *_sync
// variants drive the engine until the operation settles (single-caller use).
class Client {
 public:
  Client(Engine* engine, std::vector<Daemon*> daemons, uint32_t vnodes_per_daemon);

  void submit_put(const ObjectKey& key, Blob payload, PutCallback cb);
  void submit_get(const ObjectKey& key, GetCallback cb);

  PutAck put_sync(const ObjectKey& key, Blob payload, VirtualDuration timeout = kHour);
  GetResult get_sync(const ObjectKey& key, VirtualDuration timeout = kHour);

  Daemon& route(const ObjectKey& key) const;
  size_t ring_size() const { return ring_.size(); }

 private:
  Engine* engine_;
  std::vector<Daemon*> daemons_;
  std::vector<std::pair<uint64_t, Daemon*>> ring_;  // sorted by point
};

}  // namespace smstore
