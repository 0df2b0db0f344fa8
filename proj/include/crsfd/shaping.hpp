#pragma once

#include <string>
#include <vector>

#include "crsfd/demos.hpp"
#include "crsfd/env.hpp"
#include "crsfd/mdp.hpp"
#include "crsfd/potential.hpp"

namespace crsfd {

// How the potential of an episode-ending next state enters the shaping term.
// kZeroAtDone replaces Phi(s') by 0 on done transitions, which keeps the
// shaped episodic problem exactly policy-equivalent under the V(terminal)=0
// convention. Truncated transitions always keep Phi(s'): the episode would
// have continued. kKeepAtDone uses the fitted potential everywhere.
enum class TerminalPotentialMode { kZeroAtDone, kKeepAtDone };

// r' = r + gamma * Phi(s') - Phi(s), with the terminal handling above.
double shape_reward(double reward, double phi_s, double phi_next, double gamma, bool done,
                    TerminalPotentialMode mode = TerminalPotentialMode::kZeroAtDone);

// Env wrapper that rewrites rewards with the potential at collection time.
// Non-owning: the inner env must outlive the wrapper.
class ShapedEnv : public Env {
 public:
  ShapedEnv(Env& inner, const PotentialFn& potential, double gamma_shaping,
            TerminalPotentialMode mode = TerminalPotentialMode::kZeroAtDone);

  ResetResult reset(std::mt19937_64& rng) override;
  StepResult step(int action, std::mt19937_64& rng) override;
  int n_states() const override { return inner_.n_states(); }
  int n_actions() const override { return inner_.n_actions(); }
  std::vector<double> features(int state) const override { return inner_.features(state); }
  int default_horizon() const override { return inner_.default_horizon(); }
  std::string id() const override { return inner_.id() + "+shaped"; }

 private:
  Env& inner_;
  const PotentialFn& potential_;
  double gamma_;
  TerminalPotentialMode mode_;
  int state_ = 0;
};

// Both sides of the telescoping identity over one trajectory:
//   sum_t gamma^t r'_t  ==  sum_t gamma^t r_t + gamma^(T+1) Phi(s_{T+1}) - Phi(s_0)
// (with Phi(s_{T+1}) := 0 on done ends under kZeroAtDone). Equal up to
// floating-point accumulation; callers assert on the difference.
struct ShapedReturnIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
};
ShapedReturnIdentity shaped_return_identity(const Trajectory& traj, const PotentialFn& potential,
                                            double gamma,
                                            TerminalPotentialMode mode = TerminalPotentialMode::kZeroAtDone);

// Builds the shaped twin of `mdp` (reward tensor rewritten with the mdp's own
// discount; potential forced to 0 at terminal states to preserve the episodic
// convention) and solves both. policies_equal compares greedy sets exactly;
// max_q_shift_error is max |Q'_shaped - (Q - Phi)|.
struct InvarianceReport {
  bool policies_equal = false;
  double max_q_shift_error = 0.0;
  bool pass = false;
};
InvarianceReport verify_invariance(const TabularMDP& mdp, const std::vector<double>& phi,
                                   double tol = 1e-8);

// Total-variation style divergence used by the transfer bound:
//   max over support (s,a) of sum_s' |P0(s'|s,a) - Pk(s'|s,a)|  (range [0,2]).
struct StateAction {
  int state = 0;
  int action = 0;
};
double tv_divergence(const TabularMDP& mdp0, const TabularMDP& mdpk,
                     const std::vector<StateAction>& support);

// Per-state audit of the shaped-reward transfer lower bound on the demo
// support. For each demo-visited state s with empirical demo policy pi:
//   E_pi[r'(s,.)] >= (gammak - gamma0) * E_Tk[Phi(s')] - gamma0 * delta * max Phi
// where r' is the shaped immediate reward in the new task and delta the
// support-wide divergence above. Positivity of E_pi[r'] is additionally
// asserted wherever delta < (gammak - gamma0) * E_Tk[Phi(s')] / (gamma0 * max Phi).
struct MismatchStateRow {
  int state = 0;
  double expected_shaped_reward = 0.0;
  double expected_next_value = 0.0;  // E_{a~pi, s'~Tk}[Phi(s')]
  double bound_rhs = 0.0;
  double margin = 0.0;               // lhs - rhs, >= -tol required
  bool bound_ok = false;
  bool positivity_required = false;
  bool positivity_ok = true;
};

struct MismatchReport {
  double delta = 0.0;      // max TV over the demo support
  double max_value = 0.0;  // max Phi over all states
  double threshold = 0.0;  // min over support states of the positivity threshold
  std::vector<MismatchStateRow> rows;
  std::vector<int> excluded_states;  // demo next-states with no outgoing data
  bool all_pass = false;

  std::string table() const;  // human-readable summary
};

// Requires gammak >= gamma0 (equality allowed so the degenerate bound is
// still checkable) and matching state/action spaces. tol absorbs tensor
// arithmetic noise only.
MismatchReport verify_transfer_bound(const TabularMDP& mdp0, const TabularMDP& mdpk,
                                     const DemoSet& demos, const PotentialFn& potential,
                                     double gamma0, double gammak, double tol = 1e-10);

}  // namespace crsfd
