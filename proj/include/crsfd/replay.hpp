#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "crsfd/env.hpp"

namespace crsfd {

// Replay entry: the stored (possibly reshaped) transition plus the raw
// environment reward, kept so shaping can be audited after the fact.
struct ReplayEntry {
  Transition t;
  double raw_reward = 0.0;
};

// Two-pool replay with a decaying expert fraction. Each sampled batch takes
// exactly floor(d * batch) entries from the fixed expert pool and the rest
// from the agent ring buffer (when both pools are non-empty; a single empty
// pool yields the whole batch from the other). After n decay ticks,
// d == max(0, d0 - n * decay_step), computed from the tick count so the
// schedule is exact rather than accumulated.
class DualReplayBuffer {
 public:
  DualReplayBuffer(std::size_t agent_capacity, double initial_ratio, double ratio_decay);

  void load_expert(std::vector<ReplayEntry> entries);
  void push(const ReplayEntry& entry);

  std::vector<const ReplayEntry*> sample(int batch, std::mt19937_64& rng) const;
  void decay_ratio() { ++decay_ticks_; }

  double ratio() const;
  long decay_ticks() const { return decay_ticks_; }
  std::size_t expert_size() const { return expert_.size(); }
  std::size_t agent_size() const { return agent_.size(); }
  const std::vector<ReplayEntry>& expert_entries() const { return expert_; }
  const std::vector<ReplayEntry>& agent_entries() const { return agent_; }

  // Checkpoint plumbing: raw ring state, restored verbatim.
  std::size_t agent_next() const { return next_; }
  void restore_agent(std::vector<ReplayEntry> entries, std::size_t next);
  void restore_decay_ticks(long ticks) { decay_ticks_ = ticks; }

 private:
  std::vector<ReplayEntry> expert_;
  std::vector<ReplayEntry> agent_;
  std::size_t capacity_;
  std::size_t next_ = 0;  // ring write position once full
  double initial_ratio_;
  double ratio_decay_;
  long decay_ticks_ = 0;
};

}  // namespace crsfd
