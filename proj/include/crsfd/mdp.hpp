#pragma once

#include <random>
#include <string>
#include <vector>

namespace crsfd {

// Tie tolerance when collecting the set of greedy actions.
inline constexpr double kTieEpsilon = 1e-9;

// Default sup-norm tolerance for the iterative solvers.
inline constexpr double kSolverTol = 1e-10;

// Flat tabular MDP. transition and reward are [s][a][s'] row-major.
// Terminal states are absorbing (P[t][a][t] = 1) and carry no reward after
// absorption; by convention V(terminal) = 0 everywhere in this codebase.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;
  std::vector<double> reward;
  double discount = 0.9;
  std::vector<int> terminals;       // sorted, unique
  std::vector<double> initial_dist; // length n_states, sums to 1

  std::size_t idx(int s, int a, int s2) const {
    return (static_cast<std::size_t>(s) * n_actions + a) * n_states + s2;
  }
  double p(int s, int a, int s2) const { return transition[idx(s, a, s2)]; }
  double r(int s, int a, int s2) const { return reward[idx(s, a, s2)]; }

  bool is_terminal(int s) const;
  std::vector<char> terminal_mask() const;

  // Throws std::invalid_argument on malformed tensors: negative entries,
  // rows not summing to 1, non-absorbing terminals, bad initial_dist,
  // discount outside [0, 1).
  void validate() const;
};

// Row-stochastic policy, pi[s][a].
struct Policy {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> probs;

  double& at(int s, int a) { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
  double at(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }

  static Policy uniform(int n_states, int n_actions);
  void validate() const;
};

struct ValueIterationResult {
  std::vector<double> v;                     // V*, length n_states
  std::vector<double> q;                     // Q*, [s][a]
  std::vector<std::vector<int>> greedy_sets; // per state, actions within kTieEpsilon of max
};

// Bellman-optimality iteration to sup-norm residual <= tol. The internal
// stopping threshold is tol*(1-gamma) so the returned V* is within
// gamma*tol of the true fixed point, not just a small residual.
ValueIterationResult value_iteration(const TabularMDP& mdp, double tol = kSolverTol,
                                     long max_iters = 2000000);

struct SoftValueIterationResult {
  std::vector<double> v;  // V_soft
  std::vector<double> q;  // Q_soft, [s][a]
  Policy policy;          // softmax(Q_soft / temperature)
};

// Entropy-regularized backup: V(s) = temp * log sum_a exp(Q(s,a)/temp).
// temperature must be > 0.
SoftValueIterationResult soft_value_iteration(const TabularMDP& mdp, double temperature,
                                              double tol = kSolverTol,
                                              long max_iters = 2000000);

// Iterative evaluation of a fixed policy; returned V satisfies the linear
// Bellman identity within tol (same tightened stopping rule as above).
std::vector<double> policy_evaluation(const TabularMDP& mdp, const Policy& policy,
                                      double tol = kSolverTol, long max_iters = 2000000);

// Deterministic-as-possible policy built from a solved MDP: uniform over
// the greedy set of each state.
Policy greedy_policy(const ValueIterationResult& vi, int n_states, int n_actions);

// Numerically stable log(sum(exp(x/temp)))*temp helper shared by the soft
// solver and the learner's soft targets.
double soft_max_value(const double* q, int n, double temperature);

// Random valid MDP for property sweeps: 2..max_states states, 2..max_actions
// actions, sparse stochastic rows, rewards in [-1, 1], ~15% terminal states
// (at least one state stays non-terminal), uniform start over non-terminals.
// discount <= 0 draws one from [0.5, 0.99].
TabularMDP random_tabular_mdp(std::mt19937_64& rng, int max_states = 20, int max_actions = 4,
                              double discount = -1.0);

}  // namespace crsfd
