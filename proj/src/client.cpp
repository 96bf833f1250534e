#include "smstore/client.hpp"

#include <algorithm>

namespace smstore {

Client::Client(Engine* engine, std::vector<Daemon*> daemons, uint32_t vnodes_per_daemon)
    : engine_(engine), daemons_(std::move(daemons)) {
  if (daemons_.empty()) throw ConfigError("client needs at least one daemon");
  ring_.reserve(daemons_.size() * vnodes_per_daemon);
  for (size_t i = 0; i < daemons_.size(); i++) {
    for (uint32_t v = 0; v < vnodes_per_daemon; v++) {
      std::string label = "daemon-" + std::to_string(i) + "/" + std::to_string(v);
      ring_.emplace_back(hash64(label), daemons_[i]);
    }
  }
  std::sort(ring_.begin(), ring_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
}

Daemon& Client::route(const ObjectKey& key) const {
  uint64_t h = hash64(key.name());
  auto it = std::lower_bound(ring_.begin(), ring_.end(), h,
                             [](const auto& e, uint64_t v) { return e.first < v; });
  if (it == ring_.end()) it = ring_.begin();  // wrap
  return *it->second;
}

void Client::submit_put(const ObjectKey& key, Blob payload, PutCallback cb) {
  route(key).submit_put(key, std::move(payload), std::move(cb));
}

void Client::submit_get(const ObjectKey& key, GetCallback cb) {
  route(key).submit_get(key, std::move(cb));
}

PutAck Client::put_sync(const ObjectKey& key, Blob payload, VirtualDuration timeout) {
  PutAck out;
  bool done = false;
  submit_put(key, std::move(payload), [&](PutAck ack) {
    out = std::move(ack);
    done = true;
  });
  engine_->run_until_quiescent(engine_->now() + timeout);
  if (!done) throw StoreError("put did not settle");
  return out;
}

GetResult Client::get_sync(const ObjectKey& key, VirtualDuration timeout) {
  GetResult out;
  bool done = false;
  submit_get(key, [&](GetResult r) {
    out = std::move(r);
    done = true;
  });
  engine_->run_until_quiescent(engine_->now() + timeout);
  if (!done) throw StoreError("get did not settle");
  return out;
}

}  // namespace smstore
