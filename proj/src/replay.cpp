#include "crsfd/replay.hpp"

#include <algorithm>
#include <stdexcept>

#include "crsfd/rng.hpp"

namespace crsfd {

DualReplayBuffer::DualReplayBuffer(std::size_t agent_capacity, double initial_ratio,
                                   double ratio_decay)
    : capacity_(agent_capacity), initial_ratio_(initial_ratio), ratio_decay_(ratio_decay) {
  if (agent_capacity == 0) throw std::invalid_argument("agent replay capacity must be positive");
  if (initial_ratio < 0.0 || initial_ratio > 1.0)
    throw std::invalid_argument("expert ratio must lie in [0, 1]");
  if (ratio_decay < 0.0) throw std::invalid_argument("ratio decay must be non-negative");
  agent_.reserve(std::min<std::size_t>(agent_capacity, 4096));
}

void DualReplayBuffer::load_expert(std::vector<ReplayEntry> entries) {
  expert_ = std::move(entries);
}

void DualReplayBuffer::push(const ReplayEntry& entry) {
  if (agent_.size() < capacity_) {
    agent_.push_back(entry);
  } else {
    agent_[next_] = entry;
    next_ = (next_ + 1) % capacity_;
  }
}

double DualReplayBuffer::ratio() const {
  return std::max(0.0, initial_ratio_ - static_cast<double>(decay_ticks_) * ratio_decay_);
}

std::vector<const ReplayEntry*> DualReplayBuffer::sample(int batch, std::mt19937_64& rng) const {
  if (batch <= 0) throw std::invalid_argument("batch size must be positive");
  if (expert_.empty() && agent_.empty())
    throw std::runtime_error("cannot sample from an empty replay buffer");

  int n_expert = static_cast<int>(static_cast<double>(batch) * ratio());
  if (expert_.empty()) n_expert = 0;
  if (agent_.empty()) n_expert = batch;
  const int n_agent = batch - n_expert;

  std::vector<const ReplayEntry*> out;
  out.reserve(static_cast<std::size_t>(batch));
  for (int i = 0; i < n_expert; ++i)
    out.push_back(&expert_[static_cast<std::size_t>(rand_int(rng, static_cast<int>(expert_.size())))]);
  for (int i = 0; i < n_agent; ++i)
    out.push_back(&agent_[static_cast<std::size_t>(rand_int(rng, static_cast<int>(agent_.size())))]);
  return out;
}

void DualReplayBuffer::restore_agent(std::vector<ReplayEntry> entries, std::size_t next) {
  if (entries.size() > capacity_) throw std::invalid_argument("restored agent pool exceeds capacity");
  if (next >= capacity_ && !(next == 0 && capacity_ > 0))
    throw std::invalid_argument("restored ring position out of range");
  agent_ = std::move(entries);
  next_ = next;
}

}  // namespace crsfd
