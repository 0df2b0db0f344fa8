#include "crsfd/env.hpp"

#include <stdexcept>

#include "crsfd/rng.hpp"

namespace crsfd {

Trajectory rollout(Env& env, const ActionSampler& sampler, int horizon, std::uint64_t seed) {
  auto rng = make_rng(seed);
  return rollout(env, sampler, horizon, rng);
}

Trajectory rollout(Env& env, const ActionSampler& sampler, int horizon, std::mt19937_64& rng) {
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  Trajectory traj;
  traj.task_id = env.id();
  const ResetResult init = env.reset(rng);
  if (init.done)
    throw std::invalid_argument("rollout: environment reported done at reset");
  int s = init.state;
  for (int t = 0; t < horizon; ++t) {
    const int a = sampler(s, rng);
    if (a < 0 || a >= env.n_actions())
      throw std::invalid_argument("rollout: sampled action out of range");
    const StepResult res = env.step(a, rng);
    Transition tr;
    tr.state = s;
    tr.action = a;
    tr.reward = res.reward;
    tr.next_state = res.next_state;
    tr.done = res.done;
    tr.truncated = !res.done && (t + 1 == horizon);
    traj.transitions.push_back(tr);
    if (tr.done) break;
    s = res.next_state;
  }
  return traj;
}

TabularEnv::TabularEnv(TabularMDP mdp, std::string id) : mdp_(std::move(mdp)), id_(std::move(id)) {
  mdp_.validate();
  terminal_ = mdp_.terminal_mask();
}

ResetResult TabularEnv::reset(std::mt19937_64& rng) {
  state_ = rand_categorical(rng, mdp_.initial_dist);
  in_episode_ = true;
  return {state_, terminal_[state_] != 0};
}

StepResult TabularEnv::step(int action, std::mt19937_64& rng) {
  if (!in_episode_) throw std::logic_error("TabularEnv: step before reset");
  if (action < 0 || action >= mdp_.n_actions)
    throw std::invalid_argument("TabularEnv: action out of range");
  const std::size_t base = mdp_.idx(state_, action, 0);
  const double u = rand_double(rng);
  double acc = 0.0;
  int s2 = mdp_.n_states - 1;
  for (int j = 0; j < mdp_.n_states; ++j) {
    acc += mdp_.transition[base + j];
    if (u < acc) {
      s2 = j;
      break;
    }
  }
  StepResult res;
  res.next_state = s2;
  res.reward = mdp_.reward[base + s2];
  res.done = terminal_[s2] != 0;
  state_ = s2;
  if (res.done) in_episode_ = false;
  return res;
}

std::vector<double> TabularEnv::features(int state) const {
  // Scalar id feature; tabular critics are the intended backend for this env.
  if (mdp_.n_states == 1) return {0.0};
  return {2.0 * state / (mdp_.n_states - 1) - 1.0};
}

Trajectory random_trajectory(std::mt19937_64& rng, int n_states, int max_len) {
  if (n_states < 1 || max_len < 1)
    throw std::invalid_argument("random_trajectory: need n_states >= 1 and max_len >= 1");
  Trajectory traj;
  traj.task_id = "synthetic";
  const int len = 1 + rand_int(rng, max_len);
  int state = rand_int(rng, n_states);
  for (int t = 0; t < len; ++t) {
    Transition tr;
    tr.state = state;
    tr.action = 0;
    tr.reward = 2.0 * rand_double(rng) - 1.0;
    tr.next_state = rand_int(rng, n_states);
    if (t == len - 1) {
      tr.done = rand_double(rng) < 0.5;
      tr.truncated = !tr.done;
    }
    traj.transitions.push_back(tr);
    state = tr.next_state;
  }
  traj.success = traj.transitions.back().done;
  return traj;
}

}  // namespace crsfd
