#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "crsfd/demos.hpp"
#include "crsfd/env.hpp"
#include "crsfd/mlp.hpp"
#include "crsfd/potential.hpp"
#include "crsfd/replay.hpp"
#include "vendor/json.hpp"

namespace crsfd {

enum class CriticBackend { kTabular, kMlp };

enum class Algo { kCrsfd, kSacfd, kSac, kSqil, kBc };

std::string algo_name(Algo algo);
Algo algo_from_name(const std::string& name);

struct LearnerConfig {
  CriticBackend backend = CriticBackend::kTabular;
  double gamma = 0.94;  // discount used by the critic (the shaping discount for crsfd)
  // The soft backup adds temperature * log(n_actions) of entropy value per
  // step; keep temperature * log(A) / (1 - gamma) well under the terminal
  // reward or the soft-optimal policy avoids finishing episodes. The same
  // temperature drives action sampling, so it cannot shrink much below that
  // ceiling either or exploration freezes at the demo frontier.
  double temperature = 0.025;
  // Initial value for every tabular critic entry (the fixed point itself is
  // init-independent). Values near or above the max return turn the softmax
  // into systematic coverage of unvisited cells; the soft backup's entropy
  // income caps how small a useful optimistic start can be. MLP critics keep
  // their random near-zero initialization.
  double q_init = 0.0;
  double tau = 0.05;  // polyak step applied every target_period updates
  int target_period = 1;
  int batch = 64;
  double critic_lr = 0.5;
  double critic_lr_decay = 0.0;  // lr_t = critic_lr / (1 + decay * t); 0 keeps it constant
  long total_env_steps = 200000;
  int updates_per_episode = 0;  // 0 -> one update per environment step of the episode
  double expert_ratio = 0.25;
  double ratio_decay = 0.01;
  int ratio_decay_period = 4000;
  int pretrain_updates = 1000;
  long eval_period = 2000;
  int eval_episodes = 20;
  int horizon = 0;  // 0 -> use the environment default
  std::size_t agent_capacity = 200000;
  std::vector<int> mlp_hidden = {64, 64};
  double mlp_lr = 1e-3;
  int bc_updates = 2000;  // gradient steps for the mlp behavior-cloning baseline

  void validate() const;
};

// Discrete soft Q-learning agent. The policy is softmax(Q(s,.) / temperature);
// targets bootstrap through the soft max value temperature * logsumexp(Q/temperature)
// computed on the target critic.
class SoftQAgent {
 public:
  SoftQAgent(const LearnerConfig& cfg, const Env& env, std::uint64_t seed);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  CriticBackend backend() const { return cfg_.backend; }

  std::vector<double> q_row(int state) const;
  std::vector<double> target_q_row(int state) const;

  int act(int state, std::mt19937_64& rng) const;  // samples the soft policy
  int greedy_action(int state) const;              // argmax, lowest index on ties

  // One minibatch step of (1/B) sum (Q(s,a) - y)^2 with
  // y = r + (done ? 0 : gamma * soft_max_value(target Q(s'))). Truncated
  // transitions keep done == false and therefore bootstrap. Returns the loss.
  double td_update(const std::vector<const ReplayEntry*>& batch);

  void polyak_update();  // target <- (1 - tau) * target + tau * online
  void hard_sync();      // target <- online

  long update_count() const { return updates_; }
  void set_update_count(long n) { updates_ = n; }
  double current_lr() const;

  // Snapshot accessors used by serialization and tests.
  const std::vector<double>& table() const;
  const std::vector<double>& target_table() const;
  void restore_tabular(std::vector<double> online, std::vector<double> target);
  std::vector<double>& mutable_table();
  const MlpNet& net() const;
  const MlpNet& target_net() const;
  void restore_mlp(MlpNet online, MlpNet target);

 private:
  std::vector<double> features_of(int state) const;

  LearnerConfig cfg_;
  const Env* env_;
  int n_states_;
  int n_actions_;
  long updates_ = 0;
  std::vector<double> q_;        // tabular backend, row-major [state][action]
  std::vector<double> q_target_;
  MlpNet net_;  // mlp backend: features -> one value per action
  MlpNet net_target_;
};

struct EvalRow {
  long step = 0;
  double success_rate = 0.0;
  double mean_return = 0.0;
  double td_loss = 0.0;
};

struct RunResult {
  std::vector<EvalRow> curves;
  std::vector<std::string> warnings;
  long env_steps = 0;
  long updates = 0;
  long episodes = 0;
  long train_successes = 0;  // episodes that hit the goal while training
  bool resumed = false;
  std::shared_ptr<SoftQAgent> agent;
};

struct RunOptions {
  std::string checkpoint_path;  // empty disables checkpointing
  bool resume = false;
  int checkpoint_period_episodes = 50;
};

// Trains with conservatively shaped rewards: every stored transition (demo and
// online) carries r + gamma * phi(s') - phi(s), with phi(s') zeroed at episode
// end. Requires cfg.gamma strictly above the discount the demos were scored
// with; equal discounts would make the shaping bonus vanish.
RunResult run_crsfd(Env& env, Env& eval_env, const DemoSet& demos, const PotentialFn& potential,
                    const LearnerConfig& cfg, std::uint64_t seed, const RunOptions& opts = {});

// Baselines sharing the same loop: sacfd (demos with raw rewards), sac (no
// demos), sqil (expert reward 1, agent reward 0, no shaping), bc (supervised
// action cloning, single evaluation row, no environment interaction).
RunResult run_baseline(Algo algo, Env& env, Env& eval_env, const DemoSet* demos,
                       const LearnerConfig& cfg, std::uint64_t seed, const RunOptions& opts = {});

// Greedy-policy evaluation on a fresh rng stream; success means the episode
// terminated before the horizon.
EvalRow evaluate_policy(Env& env, const SoftQAgent& agent, int episodes, int horizon,
                        std::mt19937_64& rng);

// Critic parameters (online and target) as a versioned-free JSON fragment,
// round-trippable into an agent built for the same env and config.
nlohmann::json agent_snapshot_json(const SoftQAgent& agent);
void agent_restore_snapshot(SoftQAgent& agent, const nlohmann::json& j);

}  // namespace crsfd
