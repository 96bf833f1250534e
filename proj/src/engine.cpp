#include "smstore/engine.hpp"

namespace smstore {

void Engine::schedule(VirtualTime at, std::function<void()> fn, bool weak) {
  if (at < clock_->now()) at = clock_->now();
  if (!weak) strong_pending_++;
  queue_.push(Event{at, next_seq_++, weak, std::move(fn)});
}

void Engine::fire_next() {
  // priority_queue::top returns const&; the event must be moved out before
  // pop so callbacks can schedule more events safely.
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  clock_->advance_to(ev.at);
  if (!ev.weak) strong_pending_--;
  ev.fn();
}

void Engine::run_until(VirtualTime t) {
  while (!queue_.empty() && queue_.top().at <= t) fire_next();
  clock_->advance_to(t);
}

void Engine::run_until_quiescent(VirtualTime hard_limit) {
  while (strong_pending_ > 0) {
    if (queue_.empty()) throw StoreError("strong events pending but queue empty");
    if (queue_.top().at > hard_limit) {
      throw StoreError("simulation did not quiesce before hard limit");
    }
    fire_next();
  }
}

}  // namespace smstore
