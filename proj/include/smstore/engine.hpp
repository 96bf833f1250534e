#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "smstore/keys.hpp"
#include "smstore/vtime.hpp"

namespace smstore {

// Deterministic discrete-event loop. Events fire in (time, schedule order);
// the virtual clock only moves when an event fires. "Weak" events are
// recurring maintenance (rotation, warmup sweeps, reclamation polls) that
// must not keep the simulation alive on their own: run_until_quiescent stops
// once no strong events remain, firing weak ones only while strong work is
// still pending.
class Engine {
 public:
  explicit Engine(VirtualClock* clock) : clock_(clock) {}

  void schedule(VirtualTime at, std::function<void()> fn, bool weak = false);
  void schedule_in(VirtualDuration delay, std::function<void()> fn, bool weak = false) {
    schedule(clock_->now() + delay, std::move(fn), weak);
  }

  VirtualTime now() const { return clock_->now(); }

  // Fires every event with time <= t, then parks the clock at t.
  void run_until(VirtualTime t);

  // Fires events in order until no strong events remain. Throws StoreError
  // if the strong queue is still non-empty past `hard_limit` (stuck run).
  void run_until_quiescent(VirtualTime hard_limit);

  size_t pending_strong() const { return strong_pending_; }

 private:
  struct Event {
    VirtualTime at;
    uint64_t seq;
    bool weak;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  void fire_next();

  VirtualClock* clock_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  uint64_t next_seq_ = 0;
  size_t strong_pending_ = 0;
};

}  // namespace smstore
