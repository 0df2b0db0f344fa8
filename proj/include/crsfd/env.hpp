#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "crsfd/mdp.hpp"

namespace crsfd {

// One environment step as recorded in trajectories and replay.
// done marks task termination (bootstrap target 0); truncated marks a
// horizon cut (the value of next_state still bootstraps).
struct Transition {
  int state = 0;
  int action = 0;
  double reward = 0.0;
  int next_state = 0;
  bool done = false;
  bool truncated = false;
};

struct Trajectory {
  std::vector<Transition> transitions;
  std::string task_id;
  bool success = false;

  double total_reward() const {
    double acc = 0.0;
    for (const auto& t : transitions) acc += t.reward;
    return acc;
  }
};

struct ResetResult {
  int state = 0;
  bool done = false;  // done-on-reset is a contract violation; rollout rejects it
};

struct StepResult {
  int next_state = 0;
  double reward = 0.0;
  bool done = false;
};

// Single-owner mutable episodic environment over discrete states/actions.
class Env {
 public:
  virtual ~Env() = default;
  virtual ResetResult reset(std::mt19937_64& rng) = 0;
  virtual StepResult step(int action, std::mt19937_64& rng) = 0;
  virtual int n_states() const = 0;
  virtual int n_actions() const = 0;
  // Feature vector for function-approximation backends, each entry in [-1, 1].
  virtual std::vector<double> features(int state) const = 0;
  // 0 means "no intrinsic horizon"; drivers must then supply one.
  virtual int default_horizon() const { return 0; }
  virtual std::string id() const = 0;
};

using ActionSampler = std::function<int(int state, std::mt19937_64& rng)>;

// Runs one episode of at most `horizon` steps. The final transition is
// flagged truncated when the horizon (not the task) ended the episode.
// Deterministic for a fixed seed. Throws on horizon < 1, on out-of-range
// sampled actions, and on environments that report done at reset.
Trajectory rollout(Env& env, const ActionSampler& sampler, int horizon, std::uint64_t seed);

// Same, drawing randomness from a caller-owned generator (used when several
// episodes must share one stream).
Trajectory rollout(Env& env, const ActionSampler& sampler, int horizon, std::mt19937_64& rng);

// Synthetic chained trajectory for identity checks: 1..max_len steps over
// n_states states, rewards in [-1, 1], fair-coin done flag on the last step
// (truncated otherwise).
Trajectory random_trajectory(std::mt19937_64& rng, int n_states, int max_len = 20);

// Generic episodic wrapper around a TabularMDP: reset samples initial_dist,
// step samples the transition row, episodes end in terminal states.
class TabularEnv : public Env {
 public:
  explicit TabularEnv(TabularMDP mdp, std::string id = "tabular");

  ResetResult reset(std::mt19937_64& rng) override;
  StepResult step(int action, std::mt19937_64& rng) override;
  int n_states() const override { return mdp_.n_states; }
  int n_actions() const override { return mdp_.n_actions; }
  std::vector<double> features(int state) const override;
  std::string id() const override { return id_; }

  const TabularMDP& mdp() const { return mdp_; }

 private:
  TabularMDP mdp_;
  std::vector<char> terminal_;
  std::string id_;
  int state_ = 0;
  bool in_episode_ = false;
};

}  // namespace crsfd
