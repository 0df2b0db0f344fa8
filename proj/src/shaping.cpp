#include "crsfd/shaping.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <limits>
#include <stdexcept>

namespace crsfd {

double shape_reward(double reward, double phi_s, double phi_next, double gamma, bool done,
                    TerminalPotentialMode mode) {
  const double next = (done && mode == TerminalPotentialMode::kZeroAtDone) ? 0.0 : phi_next;
  return reward + gamma * next - phi_s;
}

ShapedEnv::ShapedEnv(Env& inner, const PotentialFn& potential, double gamma_shaping,
                     TerminalPotentialMode mode)
    : inner_(inner), potential_(potential), gamma_(gamma_shaping), mode_(mode) {
  if (!(gamma_shaping > 0.0 && gamma_shaping < 1.0))
    throw std::invalid_argument("ShapedEnv: gamma_shaping must lie in (0, 1)");
}

ResetResult ShapedEnv::reset(std::mt19937_64& rng) {
  const ResetResult res = inner_.reset(rng);
  state_ = res.state;
  return res;
}

StepResult ShapedEnv::step(int action, std::mt19937_64& rng) {
  StepResult res = inner_.step(action, rng);
  res.reward = shape_reward(res.reward, potential_.value(state_), potential_.value(res.next_state),
                            gamma_, res.done, mode_);
  state_ = res.next_state;
  return res;
}

ShapedReturnIdentity shaped_return_identity(const Trajectory& traj, const PotentialFn& potential,
                                            double gamma, TerminalPotentialMode mode) {
  ShapedReturnIdentity out;
  if (traj.transitions.empty()) return out;
  double disc = 1.0;
  double raw_return = 0.0;
  for (const auto& tr : traj.transitions) {
    out.lhs += disc * shape_reward(tr.reward, potential.value(tr.state),
                                   potential.value(tr.next_state), gamma, tr.done, mode);
    raw_return += disc * tr.reward;
    disc *= gamma;
  }
  const auto& last = traj.transitions.back();
  const double phi_end =
      (last.done && mode == TerminalPotentialMode::kZeroAtDone) ? 0.0
                                                                : potential.value(last.next_state);
  // disc is now gamma^(T+1).
  out.rhs = raw_return + disc * phi_end - potential.value(traj.transitions.front().state);
  return out;
}

InvarianceReport verify_invariance(const TabularMDP& mdp, const std::vector<double>& phi,
                                   double tol) {
  mdp.validate();
  if (phi.size() != static_cast<std::size_t>(mdp.n_states))
    throw std::invalid_argument("verify_invariance: potential size mismatch");
  const int S = mdp.n_states, A = mdp.n_actions;

  // Zero the potential at terminals: with V(terminal) = 0 on both sides, the
  // exact Q shift only holds when no shaping mass is left at absorption.
  std::vector<double> phi_eff = phi;
  for (int t : mdp.terminals) phi_eff[t] = 0.0;

  TabularMDP shaped = mdp;
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int s2 = 0; s2 < S; ++s2) {
        const std::size_t i = mdp.idx(s, a, s2);
        if (mdp.transition[i] == 0.0) continue;  // rewards off-support are irrelevant
        shaped.reward[i] = mdp.reward[i] + mdp.discount * phi_eff[s2] - phi_eff[s];
      }

  const ValueIterationResult base = value_iteration(mdp);
  const ValueIterationResult twin = value_iteration(shaped);

  InvarianceReport report;
  report.policies_equal = true;
  for (int s = 0; s < S && report.policies_equal; ++s)
    report.policies_equal = base.greedy_sets[s] == twin.greedy_sets[s];

  const std::vector<char> term = mdp.terminal_mask();
  for (int s = 0; s < S; ++s) {
    if (term[s]) continue;  // both sides are identically zero at terminals
    for (int a = 0; a < A; ++a) {
      const std::size_t i = static_cast<std::size_t>(s) * A + a;
      const double err = std::abs(twin.q[i] - (base.q[i] - phi_eff[s]));
      report.max_q_shift_error = std::max(report.max_q_shift_error, err);
    }
  }
  report.pass = report.policies_equal && report.max_q_shift_error <= tol;
  return report;
}

double tv_divergence(const TabularMDP& mdp0, const TabularMDP& mdpk,
                     const std::vector<StateAction>& support) {
  if (mdp0.n_states != mdpk.n_states || mdp0.n_actions != mdpk.n_actions)
    throw std::invalid_argument("tv_divergence: state/action space mismatch");
  double worst = 0.0;
  for (const auto& sa : support) {
    if (sa.state < 0 || sa.state >= mdp0.n_states || sa.action < 0 || sa.action >= mdp0.n_actions)
      throw std::invalid_argument("tv_divergence: support entry out of range");
    double acc = 0.0;
    for (int s2 = 0; s2 < mdp0.n_states; ++s2)
      acc += std::abs(mdp0.p(sa.state, sa.action, s2) - mdpk.p(sa.state, sa.action, s2));
    worst = std::max(worst, acc);
  }
  return worst;
}

MismatchReport verify_transfer_bound(const TabularMDP& mdp0, const TabularMDP& mdpk,
                                     const DemoSet& demos, const PotentialFn& potential,
                                     double gamma0, double gammak, double tol) {
  mdp0.validate();
  mdpk.validate();
  if (mdp0.n_states != mdpk.n_states || mdp0.n_actions != mdpk.n_actions)
    throw std::invalid_argument("verify_transfer_bound: state/action space mismatch");
  if (gammak < gamma0)
    throw std::invalid_argument("verify_transfer_bound: gammak must be >= gamma0");
  if (demos.trajectories.empty())
    throw std::invalid_argument("verify_transfer_bound: empty demo set");

  const int S = mdp0.n_states, A = mdp0.n_actions;

  // Empirical demo policy: action visit counts per source state.
  std::map<int, std::vector<long>> counts;
  std::map<int, char> seen_next;
  for (const auto& traj : demos.trajectories) {
    for (const auto& tr : traj.transitions) {
      auto& row = counts[tr.state];
      if (row.empty()) row.assign(A, 0);
      ++row[tr.action];
      seen_next[tr.next_state] = 1;
    }
  }

  MismatchReport report;
  for (const auto& [s, flag] : seen_next) {
    (void)flag;
    if (!counts.count(s)) report.excluded_states.push_back(s);
  }

  std::vector<StateAction> support;
  for (const auto& [s, row] : counts)
    for (int a = 0; a < A; ++a)
      if (row[a] > 0) support.push_back({s, a});
  report.delta = tv_divergence(mdp0, mdpk, support);

  const std::vector<double> phi = potential.dense(S);
  report.max_value = 0.0;
  for (double v : phi) report.max_value = std::max(report.max_value, v);

  report.threshold = std::numeric_limits<double>::infinity();
  report.all_pass = true;
  for (const auto& [s, row] : counts) {
    long total = 0;
    for (long c : row) total += c;

    MismatchStateRow out_row;
    out_row.state = s;
    for (int a = 0; a < A; ++a) {
      if (row[a] == 0) continue;
      const double pi = static_cast<double>(row[a]) / static_cast<double>(total);
      double next_value = 0.0, immediate = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = mdpk.p(s, a, s2);
        if (p == 0.0) continue;
        next_value += p * phi[s2];
        immediate += p * mdpk.r(s, a, s2);
      }
      // Shaped immediate reward in the new task, literal form.
      out_row.expected_shaped_reward += pi * (immediate + gammak * next_value - phi[s]);
      out_row.expected_next_value += pi * next_value;
    }
    out_row.bound_rhs =
        (gammak - gamma0) * out_row.expected_next_value - gamma0 * report.delta * report.max_value;
    out_row.margin = out_row.expected_shaped_reward - out_row.bound_rhs;
    out_row.bound_ok = out_row.margin >= -tol;

    if (report.max_value > 0.0) {
      const double threshold =
          (gammak - gamma0) * out_row.expected_next_value / (gamma0 * report.max_value);
      report.threshold = std::min(report.threshold, threshold);
      if (report.delta < threshold) {
        out_row.positivity_required = true;
        out_row.positivity_ok = out_row.expected_shaped_reward > 0.0;
      }
    }
    report.all_pass = report.all_pass && out_row.bound_ok && out_row.positivity_ok;
    report.rows.push_back(out_row);
  }
  if (!std::isfinite(report.threshold)) report.threshold = 0.0;
  return report;
}

std::string MismatchReport::table() const {
  std::ostringstream os;
  os << "delta=" << delta << " max_value=" << max_value << " threshold=" << threshold
     << " states=" << rows.size() << " excluded=" << excluded_states.size() << "\n";
  os << std::setw(7) << "state" << std::setw(14) << "E[r']" << std::setw(14) << "E[Phi(s')]"
     << std::setw(14) << "bound_rhs" << std::setw(14) << "margin" << std::setw(7) << "ok"
     << std::setw(7) << "pos" << "\n";
  for (const auto& row : rows) {
    os << std::setw(7) << row.state << std::setw(14) << std::setprecision(5)
       << row.expected_shaped_reward << std::setw(14) << row.expected_next_value << std::setw(14)
       << row.bound_rhs << std::setw(14) << row.margin << std::setw(7)
       << (row.bound_ok ? "yes" : "NO")
       << std::setw(7)
       << (row.positivity_required ? (row.positivity_ok ? "yes" : "NO") : "-") << "\n";
  }
  return os.str();
}

}  // namespace crsfd
