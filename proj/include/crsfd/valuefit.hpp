#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crsfd/demos.hpp"
#include "crsfd/potential.hpp"

namespace crsfd {

// One regression target: a demo state and its Monte-Carlo return.
struct McTarget {
  int state = 0;
  double g = 0.0;
};

// Per-trajectory discounted reward-to-go, G_t = r_t + gamma0 * G_{t+1}.
// Pure Monte-Carlo: truncated episodes get no bootstrap term. One target per
// transition, in trajectory order. Empty trajectories are skipped and
// reported through `warnings` when non-null.
std::vector<McTarget> mc_returns(const DemoSet& demos, double gamma0,
                                 std::vector<std::string>* warnings = nullptr);

// Uniform sampler over the free cells of a task. Deliberately does NOT
// exclude demo-visited states: a state's appearance in both batches only
// rebalances its effective regression weight.
struct OodSampler {
  std::vector<int> free_states;

  static OodSampler from_spec(const GridPegSpec& spec);
};

// n draws (with replacement) from the sampler; demo_states is accepted for
// interface symmetry and intentionally unused (no exclusion by design).
std::vector<int> ood_sample(const OodSampler& sampler, int n,
                            const std::vector<int>& demo_states, std::uint64_t seed);

enum class FitBackend { kTabular, kMlp };

struct ValueFitConfig {
  FitBackend backend = FitBackend::kTabular;
  double gamma0 = 0.9;
  double lambda = 1.0;        // weight of the push-OOD-to-zero term
  int n_regress_steps = 5000; // mlp backend only
  int batch_demo = 64;
  int batch_ood = 64;
  double learning_rate = 1e-3;
  std::vector<int> mlp_hidden = {64, 64};
  OodSampler ood_sampler;
  Featurizer featurizer;

  void validate() const;  // throws std::invalid_argument
};

struct LossTraceRow {
  int step = 0;
  double demo_loss = 0.0;
  double ood_loss = 0.0;
};

struct FitResult {
  PotentialFn potential;
  std::vector<LossTraceRow> trace;
  std::vector<std::string> warnings;
};

// Fits the conservative demo-value estimate: demo states regress to their MC
// returns, uniformly sampled free states regress to zero with weight lambda.
//
// Tabular backend solves the per-state least squares objective in closed form
// (with lambda = 0 the fit equals the per-state mean of the MC targets
// exactly; states without targets default to zero). Mlp backend runs plain
// SGD for n_regress_steps with fresh batches per step; non-finite losses
// abort with a diagnostic. Deterministic in `seed` either way.
FitResult fit_conservative(const DemoSet& demos, const ValueFitConfig& cfg, std::uint64_t seed);

}  // namespace crsfd
