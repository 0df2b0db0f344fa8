#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crsfd/demos.hpp"
#include "crsfd/gridpeg.hpp"
#include "crsfd/learner.hpp"
#include "crsfd/potential.hpp"
#include "crsfd/serialize.hpp"
#include "crsfd/valuefit.hpp"

namespace crsfd {

// One experiment campaign: the task panel (target shapes x shift radii), the
// algorithms to run on it, seeds, and the shared demo/fit/learner settings.
// Demonstrations and the fitted potential always come from source_shape at
// the nominal offset; every run then trains on a target task.
struct ExperimentPlan {
  std::string source_shape = "0";
  std::vector<std::string> shapes = {"1", "2", "3", "4"};
  std::vector<int> radii = {1};
  std::vector<std::string> algos = {"crsfd", "sacfd", "sac", "sqil", "bc"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  int n_demos = 40;
  int demo_horizon = 50;
  double demo_noise = 0.1;
  // Lateral slip shared by every task in the panel. Greedy evaluation on an
  // unobserved-shift task needs it: with fully deterministic movement a
  // blocked greedy route stalls in place forever.
  double slip = 0.1;
  std::uint64_t demo_seed = 7;
  std::uint64_t fit_seed = 11;
  double gamma0 = 0.9;

  LearnerConfig learner;     // learner.gamma is the shaping discount for crsfd
  // ood_sampler / featurizer are filled from the source task. The panel
  // defaults to the mlp fit: a smooth potential leaks positive value into
  // cells the demos could never visit (the source task's own wall footprint),
  // which is what lets a shifted-task agent cross ground the tabular fit
  // scores as worthless.
  ValueFitConfig value_fit = [] {
    ValueFitConfig v;
    v.backend = FitBackend::kMlp;
    return v;
  }();

  std::string shapes_dir = "data/shapes";
  std::string out_dir = "out";
  int threads = 0;  // 0 -> hardware concurrency
  bool resume = false;

  void validate() const;
};

json plan_to_json(const ExperimentPlan& plan);
// Accepts a partial document: absent fields keep their defaults.
ExperimentPlan plan_from_json(const json& j);

struct RunOutcome {
  std::string shape;
  int radius = 0;
  std::string algo;  // ablation runs use "crsfd/<variant>"
  std::uint64_t seed = 0;
  double auc = 0.0;
  double final_success = 0.0;
  double final_return = 0.0;
  std::string dir;
  bool ok = false;
  bool skipped = false;  // already complete on disk (resume)
  std::string error;
};

struct SweepResult {
  std::vector<RunOutcome> runs;
  std::string out_dir;

  bool any_failure() const {
    for (const auto& r : runs)
      if (!r.ok) return true;
    return false;
  }
};

// Mean success rate across evaluation points (the area under the success
// curve on the shared evaluation grid).
double curve_auc(const std::vector<EvalRow>& curves);

// Writes curves.csv, agent.json, and run_meta.json under dir; auc/final
// metrics are appended to the supplied metadata before it is written.
// run_meta.json lands last and marks the run complete. Returns the final meta.
json write_run_artifacts(const std::string& dir, const RunResult& result, json meta);

// Full panel: every (shape, radius, algo, seed) triple, in parallel. Per-run
// failures are recorded in the outcome list, never thrown. Writes
// aggregate.csv and summary.md under plan.out_dir.
SweepResult run_sweep(const ExperimentPlan& plan);

// Shaping ablation on the same panel: full method, lambda = 0 (no
// conservatism), gamma_k barely above gamma0 (no enlargement), and both
// removals. Potentials use the mlp backend, where the conservative term has
// something to do. Writes ablation.csv and ablation_summary.md. A non-empty
// `only` restricts the run to the named variants.
SweepResult run_ablation(const ExperimentPlan& plan, const std::vector<std::string>& only = {});

struct AuditResult {
  bool ok = true;
  std::vector<std::string> messages;
};

// Recomputes every aggregate row from the raw per-run curves on disk and
// reports mismatches and unreadable runs.
AuditResult audit_out_dir(const std::string& out_dir);

}  // namespace crsfd
