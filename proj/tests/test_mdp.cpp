#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "crsfd/env.hpp"
#include "crsfd/mdp.hpp"
#include "crsfd/rng.hpp"
#include "vendor/doctest.h"

using namespace crsfd;

namespace {

// Independent oracle: solves (I - gamma * P_pi) v = r_pi by Gaussian
// elimination with partial pivoting. Terminal states are pinned to V = 0
// directly, matching the convention of the iterative solvers.
std::vector<double> policy_eval_direct(const TabularMDP& mdp, const Policy& pi) {
  const int n = mdp.n_states;
  const auto term = mdp.terminal_mask();
  std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0), b(n, 0.0);
  for (int s = 0; s < n; ++s) {
    a[static_cast<std::size_t>(s) * n + s] = 1.0;
    if (term[s]) continue;
    for (int act = 0; act < mdp.n_actions; ++act) {
      const double pa = pi.at(s, act);
      if (pa == 0.0) continue;
      for (int s2 = 0; s2 < n; ++s2) {
        const double p = mdp.p(s, act, s2);
        if (p == 0.0) continue;
        b[s] += pa * p * mdp.r(s, act, s2);
        if (!term[s2]) a[static_cast<std::size_t>(s) * n + s2] -= mdp.discount * pa * p;
      }
    }
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int row = col + 1; row < n; ++row)
      if (std::fabs(a[static_cast<std::size_t>(row) * n + col]) >
          std::fabs(a[static_cast<std::size_t>(pivot) * n + col]))
        pivot = row;
    for (int k = 0; k < n; ++k)
      std::swap(a[static_cast<std::size_t>(col) * n + k], a[static_cast<std::size_t>(pivot) * n + k]);
    std::swap(b[col], b[pivot]);
    const double d = a[static_cast<std::size_t>(col) * n + col];
    REQUIRE(std::fabs(d) > 1e-12);
    for (int row = 0; row < n; ++row) {
      if (row == col) continue;
      const double f = a[static_cast<std::size_t>(row) * n + col] / d;
      if (f == 0.0) continue;
      for (int k = col; k < n; ++k)
        a[static_cast<std::size_t>(row) * n + k] -= f * a[static_cast<std::size_t>(col) * n + k];
      b[row] -= f * b[col];
    }
  }
  std::vector<double> v(n);
  for (int s = 0; s < n; ++s) v[s] = b[s] / a[static_cast<std::size_t>(s) * n + s];
  return v;
}

// Three-state deterministic chain 0 -> 1 -> 2(terminal). Action 0 advances
// (reward 1 on entering the terminal), action 1 stays in place.
TabularMDP chain_mdp(double gamma) {
  TabularMDP m;
  m.n_states = 3;
  m.n_actions = 2;
  m.discount = gamma;
  m.transition.assign(3 * 2 * 3, 0.0);
  m.reward.assign(3 * 2 * 3, 0.0);
  m.transition[m.idx(0, 0, 1)] = 1.0;
  m.transition[m.idx(1, 0, 2)] = 1.0;
  m.reward[m.idx(1, 0, 2)] = 1.0;
  m.transition[m.idx(0, 1, 0)] = 1.0;
  m.transition[m.idx(1, 1, 1)] = 1.0;
  for (int a = 0; a < 2; ++a) m.transition[m.idx(2, a, 2)] = 1.0;
  m.terminals = {2};
  m.initial_dist = {1.0, 0.0, 0.0};
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("value iteration solves the deterministic chain in closed form") {
  const TabularMDP m = chain_mdp(0.9);
  const auto vi = value_iteration(m, 1e-12);
  CHECK(vi.v[0] == doctest::Approx(0.9).epsilon(1e-10));
  CHECK(vi.v[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(vi.v[2] == doctest::Approx(0.0));
  REQUIRE(vi.greedy_sets.size() == 3);
  CHECK(vi.greedy_sets[0] == std::vector<int>{0});
  CHECK(vi.greedy_sets[1] == std::vector<int>{0});
}

TEST_CASE("value iteration satisfies the Bellman optimality identity on random MDPs") {
  auto rng = make_rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const TabularMDP m = random_tabular_mdp(rng);
    const auto vi = value_iteration(m, 1e-11);
    const auto term = m.terminal_mask();
    double worst = 0.0;
    for (int s = 0; s < m.n_states; ++s) {
      double best = term[s] ? 0.0 : -1e300;
      for (int a = 0; a < m.n_actions && !term[s]; ++a) {
        double q = 0.0;
        for (int s2 = 0; s2 < m.n_states; ++s2) {
          const double p = m.p(s, a, s2);
          if (p == 0.0) continue;
          q += p * (m.r(s, a, s2) + (term[s2] ? 0.0 : m.discount * vi.v[s2]));
        }
        CHECK(vi.q[static_cast<std::size_t>(s) * m.n_actions + a] == doctest::Approx(q).epsilon(1e-8));
        best = std::max(best, q);
      }
      worst = std::max(worst, std::fabs(vi.v[s] - (term[s] ? 0.0 : best)));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("greedy sets contain exactly the within-epsilon argmax actions") {
  auto rng = make_rng(102);
  for (int trial = 0; trial < 20; ++trial) {
    const TabularMDP m = random_tabular_mdp(rng);
    const auto vi = value_iteration(m);
    for (int s = 0; s < m.n_states; ++s) {
      double best = -1e300;
      for (int a = 0; a < m.n_actions; ++a)
        best = std::max(best, vi.q[static_cast<std::size_t>(s) * m.n_actions + a]);
      std::vector<int> expect;
      for (int a = 0; a < m.n_actions; ++a)
        if (vi.q[static_cast<std::size_t>(s) * m.n_actions + a] >= best - kTieEpsilon)
          expect.push_back(a);
      CHECK(vi.greedy_sets[s] == expect);
    }
  }
}

TEST_CASE("iterative policy evaluation matches direct linear solve") {
  auto rng = make_rng(103);
  for (int trial = 0; trial < 40; ++trial) {
    const TabularMDP m = random_tabular_mdp(rng);
    Policy pi = Policy::uniform(m.n_states, m.n_actions);
    // Tilt the policy so the test is not uniform-only.
    for (int s = 0; s < m.n_states; ++s) {
      double z = 0.0;
      for (int a = 0; a < m.n_actions; ++a) {
        pi.at(s, a) = 0.1 + rand_double(rng);
        z += pi.at(s, a);
      }
      for (int a = 0; a < m.n_actions; ++a) pi.at(s, a) /= z;
    }
    pi.validate();
    const auto iter = policy_evaluation(m, pi, 1e-11);
    const auto direct = policy_eval_direct(m, pi);
    for (int s = 0; s < m.n_states; ++s)
      CHECK(iter[s] == doctest::Approx(direct[s]).epsilon(1e-7));
  }
}

TEST_CASE("policy evaluation of the greedy policy recovers V*") {
  auto rng = make_rng(104);
  for (int trial = 0; trial < 20; ++trial) {
    const TabularMDP m = random_tabular_mdp(rng);
    const auto vi = value_iteration(m, 1e-11);
    const Policy pi = greedy_policy(vi, m.n_states, m.n_actions);
    const auto v = policy_evaluation(m, pi, 1e-11);
    for (int s = 0; s < m.n_states; ++s)
      CHECK(v[s] == doctest::Approx(vi.v[s]).epsilon(1e-7));
  }
}

TEST_CASE("soft value iteration has the entropy fixed point of a uniform self-loop") {
  // One nonterminal state, every action loops back with reward r: the soft
  // value solves V = r + T log(A) + gamma V exactly.
  const int n_actions = 5;
  const double r = 0.25, gamma = 0.8, temp = 0.3;
  TabularMDP m;
  m.n_states = 1;
  m.n_actions = n_actions;
  m.discount = gamma;
  m.transition.assign(n_actions, 1.0);
  m.reward.assign(n_actions, r);
  m.initial_dist = {1.0};
  m.validate();
  const auto res = soft_value_iteration(m, temp, 1e-12);
  const double expect = (r + temp * std::log(static_cast<double>(n_actions))) / (1.0 - gamma);
  CHECK(res.v[0] == doctest::Approx(expect).epsilon(1e-9));
  for (int a = 0; a < n_actions; ++a)
    CHECK(res.policy.at(0, a) == doctest::Approx(1.0 / n_actions).epsilon(1e-9));
}

TEST_CASE("soft value iteration satisfies its own backup and softmax policy") {
  auto rng = make_rng(105);
  const double temp = 0.5;
  for (int trial = 0; trial < 20; ++trial) {
    const TabularMDP m = random_tabular_mdp(rng);
    const auto res = soft_value_iteration(m, temp, 1e-11);
    const auto term = m.terminal_mask();
    for (int s = 0; s < m.n_states; ++s) {
      if (term[s]) {
        CHECK(res.v[s] == doctest::Approx(0.0));
        continue;
      }
      for (int a = 0; a < m.n_actions; ++a) {
        double q = 0.0;
        for (int s2 = 0; s2 < m.n_states; ++s2) {
          const double p = m.p(s, a, s2);
          if (p == 0.0) continue;
          q += p * (m.r(s, a, s2) + (term[s2] ? 0.0 : m.discount * res.v[s2]));
        }
        CHECK(res.q[static_cast<std::size_t>(s) * m.n_actions + a] ==
              doctest::Approx(q).epsilon(1e-8));
      }
      const double v = soft_max_value(&res.q[static_cast<std::size_t>(s) * m.n_actions],
                                      m.n_actions, temp);
      CHECK(res.v[s] == doctest::Approx(v).epsilon(1e-8));
      double z = 0.0;
      for (int a = 0; a < m.n_actions; ++a) z += res.policy.at(s, a);
      CHECK(z == doctest::Approx(1.0).epsilon(1e-9));
      // softmax(Q/T) identity: pi(a) = exp((Q(a) - V)/T).
      for (int a = 0; a < m.n_actions; ++a) {
        const double q = res.q[static_cast<std::size_t>(s) * m.n_actions + a];
        CHECK(res.policy.at(s, a) == doctest::Approx(std::exp((q - res.v[s]) / temp)).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("soft value iteration approaches hard value iteration as temperature vanishes") {
  auto rng = make_rng(106);
  const TabularMDP m = random_tabular_mdp(rng);
  const auto hard = value_iteration(m, 1e-11);
  const auto soft = soft_value_iteration(m, 1e-4, 1e-11);
  for (int s = 0; s < m.n_states; ++s)
    CHECK(soft.v[s] == doctest::Approx(hard.v[s]).epsilon(1e-3));
}

TEST_CASE("soft_max_value is a shifted stable logsumexp") {
  auto rng = make_rng(107);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + rand_int(rng, 6);
    const double temp = 0.05 + rand_double(rng);
    std::vector<double> q(n);
    for (auto& v : q) v = 4.0 * rand_double(rng) - 2.0;
    double naive = 0.0;
    for (double v : q) naive += std::exp(v / temp);
    naive = temp * std::log(naive);
    CHECK(soft_max_value(q.data(), n, temp) == doctest::Approx(naive).epsilon(1e-10));
    // Shift identity and single-element identity.
    const double c = 10.0 * rand_double(rng) - 5.0;
    std::vector<double> shifted(q);
    for (auto& v : shifted) v += c;
    CHECK(soft_max_value(shifted.data(), n, temp) ==
          doctest::Approx(soft_max_value(q.data(), n, temp) + c).epsilon(1e-9));
    CHECK(soft_max_value(q.data(), 1, temp) == doctest::Approx(q[0]));
  }
  // Magnitudes that overflow a naive exp must still come out finite and tight.
  std::vector<double> big = {1e6, 1e6 - 3.0};
  const double v = soft_max_value(big.data(), 2, 1.0);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(1e6 + std::log(1.0 + std::exp(-3.0))).epsilon(1e-12));
}

TEST_CASE("monte-carlo returns of a random policy agree with policy evaluation") {
  auto rng = make_rng(108);
  TabularMDP m;
  // Make sure the sampled MDP has a reachable terminal so episodes are not
  // all horizon-truncated (keeps the truncation bias term negligible).
  for (;;) {
    m = random_tabular_mdp(rng, 8, 3, 0.9);
    if (!m.terminals.empty()) break;
  }
  const Policy pi = Policy::uniform(m.n_states, m.n_actions);
  const auto v = policy_evaluation(m, pi, 1e-11);
  double exact = 0.0;
  for (int s = 0; s < m.n_states; ++s) exact += m.initial_dist[s] * v[s];

  TabularEnv env(m);
  const ActionSampler uniform = [&](int, std::mt19937_64& r) { return rand_int(r, m.n_actions); };
  const int episodes = 30000, horizon = 200;
  double sum = 0.0, sumsq = 0.0;
  auto roll_rng = make_rng(109);
  for (int e = 0; e < episodes; ++e) {
    const Trajectory traj = rollout(env, uniform, horizon, roll_rng);
    double g = 0.0, w = 1.0;
    for (const auto& t : traj.transitions) {
      g += w * t.reward;
      w *= m.discount;
    }
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / episodes;
  const double var = std::max(0.0, sumsq / episodes - mean * mean);
  const double se = std::sqrt(var / episodes);
  // gamma^horizon bounds the truncation bias; 5 standard errors the noise.
  const double slack = 5.0 * se + std::pow(m.discount, horizon) * 20.0 + 1e-6;
  CHECK(std::fabs(mean - exact) <= slack);
}

TEST_CASE("random_tabular_mdp emits valid MDPs across seeds") {
  auto rng = make_rng(110);
  for (int trial = 0; trial < 200; ++trial) {
    const TabularMDP m = random_tabular_mdp(rng);
    CHECK_NOTHROW(m.validate());
    CHECK(m.n_states >= 2);
    CHECK(m.n_states <= 20);
    CHECK(m.n_actions >= 2);
    CHECK(m.n_actions <= 4);
    CHECK(m.discount >= 0.5);
    CHECK(m.discount <= 0.99);
    CHECK(static_cast<int>(m.terminals.size()) < m.n_states);
    for (int t : m.terminals) CHECK(m.initial_dist[t] == doctest::Approx(0.0));
  }
}

TEST_CASE("validate rejects malformed tensors") {
  TabularMDP good = chain_mdp(0.9);
  SUBCASE("row sum off") {
    TabularMDP m = good;
    m.transition[m.idx(0, 0, 1)] = 0.7;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("negative probability") {
    TabularMDP m = good;
    m.transition[m.idx(0, 0, 1)] = -0.2;
    m.transition[m.idx(0, 0, 0)] = 1.2;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("non-absorbing terminal") {
    TabularMDP m = good;
    m.transition[m.idx(2, 0, 2)] = 0.0;
    m.transition[m.idx(2, 0, 1)] = 1.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("rewarding terminal self-loop") {
    TabularMDP m = good;
    m.reward[m.idx(2, 0, 2)] = 0.5;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("discount out of range") {
    TabularMDP m = good;
    m.discount = 1.0;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
  SUBCASE("initial distribution off") {
    TabularMDP m = good;
    m.initial_dist = {0.5, 0.0, 0.0};
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  }
}

TEST_CASE("greedy_policy spreads mass uniformly over ties") {
  ValueIterationResult vi;
  vi.greedy_sets = {{0, 2}, {1}};
  const Policy pi = greedy_policy(vi, 2, 3);
  CHECK(pi.at(0, 0) == doctest::Approx(0.5));
  CHECK(pi.at(0, 1) == doctest::Approx(0.0));
  CHECK(pi.at(0, 2) == doctest::Approx(0.5));
  CHECK(pi.at(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("rollout flags horizon cuts as truncated, task ends as done") {
  const TabularMDP m = chain_mdp(0.9);
  TabularEnv env(m);
  const ActionSampler advance = [](int, std::mt19937_64&) { return 0; };
  const ActionSampler stay = [](int, std::mt19937_64&) { return 1; };

  const Trajectory finished = rollout(env, advance, 10, 42);
  REQUIRE(finished.transitions.size() == 2);
  CHECK(finished.transitions.back().done);
  CHECK_FALSE(finished.transitions.back().truncated);
  CHECK(finished.success);
  CHECK(finished.total_reward() == doctest::Approx(1.0));

  const Trajectory cut = rollout(env, stay, 5, 42);
  REQUIRE(cut.transitions.size() == 5);
  CHECK_FALSE(cut.transitions.back().done);
  CHECK(cut.transitions.back().truncated);
  CHECK_FALSE(cut.success);
}

TEST_CASE("rollout is deterministic in the seed") {
  auto rng = make_rng(111);
  const TabularMDP m = random_tabular_mdp(rng);
  TabularEnv env(m);
  const ActionSampler uniform = [&](int, std::mt19937_64& r) { return rand_int(r, m.n_actions); };
  const Trajectory a = rollout(env, uniform, 30, 7);
  const Trajectory b = rollout(env, uniform, 30, 7);
  REQUIRE(a.transitions.size() == b.transitions.size());
  for (std::size_t i = 0; i < a.transitions.size(); ++i) {
    CHECK(a.transitions[i].state == b.transitions[i].state);
    CHECK(a.transitions[i].action == b.transitions[i].action);
    CHECK(a.transitions[i].reward == b.transitions[i].reward);
    CHECK(a.transitions[i].next_state == b.transitions[i].next_state);
  }
}
