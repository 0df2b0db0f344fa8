#include "crsfd/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include "crsfd/rng.hpp"

namespace crsfd {

namespace {

constexpr double kRowSumSlack = 1e-9;

// One Bellman backup for (s, a) against the value vector v.
double backup(const TabularMDP& mdp, int s, int a, const std::vector<double>& v) {
  const std::size_t base = mdp.idx(s, a, 0);
  double acc = 0.0;
  for (int s2 = 0; s2 < mdp.n_states; ++s2) {
    const double p = mdp.transition[base + s2];
    if (p == 0.0) continue;
    acc += p * (mdp.reward[base + s2] + mdp.discount * v[s2]);
  }
  return acc;
}

}  // namespace

bool TabularMDP::is_terminal(int s) const {
  return std::binary_search(terminals.begin(), terminals.end(), s);
}

std::vector<char> TabularMDP::terminal_mask() const {
  std::vector<char> mask(n_states, 0);
  for (int t : terminals) mask[t] = 1;
  return mask;
}

void TabularMDP::validate() const {
  if (n_states <= 0 || n_actions <= 0)
    throw std::invalid_argument("TabularMDP: n_states and n_actions must be positive");
  const std::size_t want = static_cast<std::size_t>(n_states) * n_actions * n_states;
  if (transition.size() != want || reward.size() != want)
    throw std::invalid_argument("TabularMDP: tensor size mismatch");
  if (!(discount >= 0.0 && discount < 1.0))
    throw std::invalid_argument("TabularMDP: discount must lie in [0, 1)");
  if (initial_dist.size() != static_cast<std::size_t>(n_states))
    throw std::invalid_argument("TabularMDP: initial_dist size mismatch");

  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n_states; ++s2) {
        const double v = p(s, a, s2);
        if (v < 0.0) throw std::invalid_argument("TabularMDP: negative transition probability");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kRowSumSlack)
        throw std::invalid_argument("TabularMDP: transition row does not sum to 1");
    }
  }
  for (int t : terminals) {
    if (t < 0 || t >= n_states) throw std::invalid_argument("TabularMDP: terminal id out of range");
    for (int a = 0; a < n_actions; ++a) {
      if (std::abs(p(t, a, t) - 1.0) > kRowSumSlack)
        throw std::invalid_argument("TabularMDP: terminal state is not absorbing");
    }
  }
  double init_sum = 0.0;
  for (double v : initial_dist) {
    if (v < 0.0) throw std::invalid_argument("TabularMDP: negative initial probability");
    init_sum += v;
  }
  if (std::abs(init_sum - 1.0) > kRowSumSlack)
    throw std::invalid_argument("TabularMDP: initial_dist does not sum to 1");
}

Policy Policy::uniform(int n_states, int n_actions) {
  Policy pi;
  pi.n_states = n_states;
  pi.n_actions = n_actions;
  pi.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions);
  return pi;
}

void Policy::validate() const {
  if (probs.size() != static_cast<std::size_t>(n_states) * n_actions)
    throw std::invalid_argument("Policy: size mismatch");
  for (int s = 0; s < n_states; ++s) {
    double sum = 0.0;
    for (int a = 0; a < n_actions; ++a) {
      if (at(s, a) < 0.0) throw std::invalid_argument("Policy: negative probability");
      sum += at(s, a);
    }
    if (std::abs(sum - 1.0) > kRowSumSlack)
      throw std::invalid_argument("Policy: row does not sum to 1");
  }
}

double soft_max_value(const double* q, int n, double temperature) {
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) m = std::max(m, q[i]);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += std::exp((q[i] - m) / temperature);
  return m + temperature * std::log(acc);
}

ValueIterationResult value_iteration(const TabularMDP& mdp, double tol, long max_iters) {
  mdp.validate();
  if (tol <= 0.0) throw std::invalid_argument("value_iteration: tol must be positive");
  const int S = mdp.n_states, A = mdp.n_actions;
  const std::vector<char> term = mdp.terminal_mask();
  // Tightened threshold: guarantees ||V - V*|| <= gamma*tol, and therefore a
  // Bellman residual well under tol.
  const double stop = tol * (1.0 - mdp.discount);

  std::vector<double> v(S, 0.0), v_next(S, 0.0);
  double resid = std::numeric_limits<double>::infinity();
  for (long it = 0; it < max_iters && resid > stop; ++it) {
    resid = 0.0;
    for (int s = 0; s < S; ++s) {
      double best = 0.0;
      if (!term[s]) {
        best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < A; ++a) best = std::max(best, backup(mdp, s, a, v));
      }
      resid = std::max(resid, std::abs(best - v[s]));
      v_next[s] = best;
    }
    v.swap(v_next);
  }
  if (resid > stop) throw std::runtime_error("value_iteration: did not converge");

  ValueIterationResult out;
  out.v.assign(S, 0.0);
  out.q.assign(static_cast<std::size_t>(S) * A, 0.0);
  out.greedy_sets.resize(S);
  for (int s = 0; s < S; ++s) {
    double best = 0.0;
    if (!term[s]) {
      best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a) {
        const double qa = backup(mdp, s, a, v);
        out.q[static_cast<std::size_t>(s) * A + a] = qa;
        best = std::max(best, qa);
      }
    }
    out.v[s] = best;
    for (int a = 0; a < A; ++a)
      if (out.q[static_cast<std::size_t>(s) * A + a] >= best - kTieEpsilon)
        out.greedy_sets[s].push_back(a);
  }
  return out;
}

SoftValueIterationResult soft_value_iteration(const TabularMDP& mdp, double temperature,
                                              double tol, long max_iters) {
  mdp.validate();
  if (temperature <= 0.0)
    throw std::invalid_argument("soft_value_iteration: temperature must be positive");
  if (tol <= 0.0) throw std::invalid_argument("soft_value_iteration: tol must be positive");
  const int S = mdp.n_states, A = mdp.n_actions;
  const std::vector<char> term = mdp.terminal_mask();
  const double stop = tol * (1.0 - mdp.discount);

  std::vector<double> v(S, 0.0), v_next(S, 0.0), qrow(A, 0.0);
  double resid = std::numeric_limits<double>::infinity();
  for (long it = 0; it < max_iters && resid > stop; ++it) {
    resid = 0.0;
    for (int s = 0; s < S; ++s) {
      double val = 0.0;
      if (!term[s]) {
        for (int a = 0; a < A; ++a) qrow[a] = backup(mdp, s, a, v);
        val = soft_max_value(qrow.data(), A, temperature);
      }
      resid = std::max(resid, std::abs(val - v[s]));
      v_next[s] = val;
    }
    v.swap(v_next);
  }
  if (resid > stop) throw std::runtime_error("soft_value_iteration: did not converge");

  SoftValueIterationResult out;
  out.v.assign(S, 0.0);
  out.q.assign(static_cast<std::size_t>(S) * A, 0.0);
  out.policy.n_states = S;
  out.policy.n_actions = A;
  out.policy.probs.assign(static_cast<std::size_t>(S) * A, 1.0 / A);
  for (int s = 0; s < S; ++s) {
    if (term[s]) continue;  // terminal rows keep the uniform convention
    for (int a = 0; a < A; ++a)
      out.q[static_cast<std::size_t>(s) * A + a] = backup(mdp, s, a, v);
    const double* q = &out.q[static_cast<std::size_t>(s) * A];
    out.v[s] = soft_max_value(q, A, temperature);
    double norm = 0.0;
    for (int a = 0; a < A; ++a) {
      const double e = std::exp((q[a] - out.v[s]) / temperature);
      out.policy.at(s, a) = e;
      norm += e;
    }
    for (int a = 0; a < A; ++a) out.policy.at(s, a) /= norm;
  }
  return out;
}

std::vector<double> policy_evaluation(const TabularMDP& mdp, const Policy& policy,
                                      double tol, long max_iters) {
  mdp.validate();
  policy.validate();
  if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
    throw std::invalid_argument("policy_evaluation: policy shape mismatch");
  if (tol <= 0.0) throw std::invalid_argument("policy_evaluation: tol must be positive");
  const int S = mdp.n_states, A = mdp.n_actions;
  const std::vector<char> term = mdp.terminal_mask();
  const double stop = tol * (1.0 - mdp.discount);

  std::vector<double> v(S, 0.0), v_next(S, 0.0);
  double resid = std::numeric_limits<double>::infinity();
  for (long it = 0; it < max_iters && resid > stop; ++it) {
    resid = 0.0;
    for (int s = 0; s < S; ++s) {
      double val = 0.0;
      if (!term[s]) {
        for (int a = 0; a < A; ++a) {
          const double w = policy.at(s, a);
          if (w == 0.0) continue;
          val += w * backup(mdp, s, a, v);
        }
      }
      resid = std::max(resid, std::abs(val - v[s]));
      v_next[s] = val;
    }
    v.swap(v_next);
  }
  if (resid > stop) throw std::runtime_error("policy_evaluation: did not converge");
  return v;
}

Policy greedy_policy(const ValueIterationResult& vi, int n_states, int n_actions) {
  Policy pi;
  pi.n_states = n_states;
  pi.n_actions = n_actions;
  pi.probs.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
  for (int s = 0; s < n_states; ++s) {
    const auto& set = vi.greedy_sets[s];
    for (int a : set) pi.at(s, a) = 1.0 / static_cast<double>(set.size());
  }
  return pi;
}

TabularMDP random_tabular_mdp(std::mt19937_64& rng, int max_states, int max_actions,
                              double discount) {
  if (max_states < 2 || max_actions < 2)
    throw std::invalid_argument("random_tabular_mdp: need at least 2 states and 2 actions");
  TabularMDP mdp;
  mdp.n_states = 2 + rand_int(rng, max_states - 1);
  mdp.n_actions = 2 + rand_int(rng, max_actions - 1);
  mdp.discount = discount > 0.0 ? discount : 0.5 + 0.49 * rand_double(rng);

  std::vector<char> terminal(static_cast<std::size_t>(mdp.n_states), 0);
  for (int s = 0; s < mdp.n_states; ++s) terminal[s] = rand_double(rng) < 0.15 ? 1 : 0;
  terminal[rand_int(rng, mdp.n_states)] = 0;  // keep at least one live state

  const std::size_t n = static_cast<std::size_t>(mdp.n_states) * mdp.n_actions * mdp.n_states;
  mdp.transition.assign(n, 0.0);
  mdp.reward.assign(n, 0.0);
  for (int s = 0; s < mdp.n_states; ++s) {
    if (terminal[s]) {
      mdp.terminals.push_back(s);
      for (int a = 0; a < mdp.n_actions; ++a) mdp.transition[mdp.idx(s, a, s)] = 1.0;
      continue;
    }
    for (int a = 0; a < mdp.n_actions; ++a) {
      const int support = 1 + rand_int(rng, std::min(3, mdp.n_states));
      std::vector<double> w(static_cast<std::size_t>(support));
      std::vector<int> dst(static_cast<std::size_t>(support));
      double total = 0.0;
      for (int k = 0; k < support; ++k) {
        dst[k] = rand_int(rng, mdp.n_states);
        w[k] = 0.05 + rand_double(rng);
        total += w[k];
      }
      for (int k = 0; k < support; ++k) {
        mdp.transition[mdp.idx(s, a, dst[k])] += w[k] / total;
        mdp.reward[mdp.idx(s, a, dst[k])] = 2.0 * rand_double(rng) - 1.0;
      }
    }
  }

  int live = 0;
  for (int s = 0; s < mdp.n_states; ++s)
    if (!terminal[s]) ++live;
  mdp.initial_dist.assign(static_cast<std::size_t>(mdp.n_states), 0.0);
  for (int s = 0; s < mdp.n_states; ++s)
    if (!terminal[s]) mdp.initial_dist[s] = 1.0 / static_cast<double>(live);

  mdp.validate();
  return mdp;
}

}  // namespace crsfd
