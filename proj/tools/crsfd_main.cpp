// crsfd: demo generation, conservative value fitting, shaped training, and
// verification for the GridPeg transfer benchmark.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 violated
// assertion or verification failure, 3 partial sweep failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "crsfd/bench.hpp"
#include "crsfd/demos.hpp"
#include "crsfd/gridpeg.hpp"
#include "crsfd/learner.hpp"
#include "crsfd/mdp.hpp"
#include "crsfd/potential.hpp"
#include "crsfd/rng.hpp"
#include "crsfd/serialize.hpp"
#include "crsfd/shaping.hpp"
#include "crsfd/valuefit.hpp"
#include "vendor/CLI11.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitViolation = 2;
constexpr int kExitPartialFailure = 3;

void require_file(const std::string& path, const std::string& what) {
  if (!std::filesystem::exists(path))
    throw std::invalid_argument(what + " not found: " + path);
}

// "SHAPE[:RADIUS]", e.g. "1" or "3:2".
void parse_task_arg(const std::string& arg, std::string* shape, int* radius) {
  const std::size_t colon = arg.find(':');
  *shape = arg.substr(0, colon == std::string::npos ? arg.size() : colon);
  *radius = 0;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      *radius = std::stoi(arg.substr(colon + 1), &used);
      if (used != arg.size() - colon - 1) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad --task value '" + arg + "': expected SHAPE or SHAPE:RADIUS");
    }
  }
  if (shape->empty()) throw std::invalid_argument("bad --task value: empty shape id");
  if (*radius < 0) throw std::invalid_argument("bad --task value: negative shift radius");
}

// --- gen-demos --------------------------------------------------------------

struct GenDemosArgs {
  std::string shape;
  std::string shapes_dir = "data/shapes";
  int n_traj = 40;
  int horizon = 50;
  double noise = 0.1;
  double gamma0 = 0.9;
  std::uint64_t seed = 7;
  std::string out;
};

int cmd_gen_demos(const GenDemosArgs& args) {
  crsfd::GridPegSpec spec;
  spec.shape = crsfd::load_shape(args.shapes_dir, args.shape);
  spec.horizon = args.horizon;
  spec.validate(0);

  const crsfd::DemoSet demos = crsfd::collect_demos(spec, args.n_traj, args.horizon, args.noise,
                                                    args.gamma0, args.seed);
  crsfd::write_json_file(args.out, crsfd::demos_to_json(demos));

  double total_len = 0.0;
  std::map<int, int> hist;  // steps-to-success -> count, binned by 5
  for (const auto& traj : demos.trajectories) {
    const int len = static_cast<int>(traj.transitions.size());
    total_len += len;
    hist[(len / 5) * 5] += 1;
  }
  std::printf("wrote %d demonstrations from %s to %s\n",
              static_cast<int>(demos.trajectories.size()), demos.source_task.c_str(),
              args.out.c_str());
  std::printf("mean length: %.2f steps (horizon %d)\n",
              total_len / static_cast<double>(demos.trajectories.size()), args.horizon);
  std::printf("success-step histogram:\n");
  for (const auto& [bin, count] : hist) {
    std::printf("  [%2d,%2d): %-4d ", bin, bin + 5, count);
    for (int i = 0; i < count; ++i) std::putchar('#');
    std::putchar('\n');
  }
  return kExitOk;
}

// --- fit-value ---------------------------------------------------------------

struct FitValueArgs {
  std::string demos_path;
  std::string shapes_dir = "data/shapes";
  double lambda = 1.0;
  int steps = 5000;
  std::string backend = "tabular";
  std::uint64_t seed = 11;
  std::string out;
  std::string loss_out;  // default: <out>.loss.csv
};

int cmd_fit_value(const FitValueArgs& args) {
  require_file(args.demos_path, "demo file");
  const crsfd::DemoSet demos = crsfd::demos_from_json(crsfd::read_json_file(args.demos_path));
  const crsfd::GridPegSpec spec =
      crsfd::GridPegSpec::from_task_id(demos.source_task, args.shapes_dir);

  crsfd::ValueFitConfig cfg;
  cfg.backend =
      args.backend == "mlp" ? crsfd::FitBackend::kMlp : crsfd::FitBackend::kTabular;
  cfg.gamma0 = demos.gamma0;
  cfg.lambda = args.lambda;
  cfg.n_regress_steps = args.steps;
  cfg.ood_sampler = crsfd::OodSampler::from_spec(spec);
  cfg.featurizer = crsfd::Featurizer{spec.width, spec.height};
  cfg.validate();

  const crsfd::FitResult fit = crsfd::fit_conservative(demos, cfg, args.seed);
  crsfd::write_json_file(args.out, crsfd::potential_to_json(fit.potential));

  const std::string loss_path = args.loss_out.empty() ? args.out + ".loss.csv" : args.loss_out;
  std::vector<std::vector<double>> rows;
  for (const auto& row : fit.trace)
    rows.push_back({static_cast<double>(row.step), row.demo_loss, row.ood_loss});
  crsfd::write_csv(loss_path, {"step", "demo_loss", "ood_loss"}, rows);

  std::printf("fit %s potential (lambda %.6g, gamma0 %.6g) from %d trajectories\n",
              args.backend.c_str(), args.lambda, demos.gamma0,
              static_cast<int>(demos.trajectories.size()));
  std::printf("potential: %s\nloss trace: %s\n", args.out.c_str(), loss_path.c_str());
  for (const auto& w : fit.warnings) std::printf("warning: %s\n", w.c_str());

  if (cfg.backend == crsfd::FitBackend::kTabular && args.lambda == 0.0) {
    // With no conservative term the closed-form fit must reproduce the
    // per-state Monte-Carlo means, bit for bit up to summation order.
    const auto targets = crsfd::mc_returns(demos, demos.gamma0);
    std::map<int, std::pair<double, int>> acc;
    for (const auto& t : targets) {
      acc[t.state].first += t.g;
      acc[t.state].second += 1;
    }
    double max_diff = 0.0;
    for (const auto& [state, sum_count] : acc) {
      const double mean = sum_count.first / sum_count.second;
      max_diff = std::max(max_diff, std::abs(fit.potential.value(state) - mean));
    }
    std::printf("lambda=0 check: demo-state values vs Monte-Carlo means, max |diff| = %.3g\n",
                max_diff);
    if (max_diff > 1e-12) {
      std::fprintf(stderr, "error: lambda=0 fit drifted from the Monte-Carlo targets\n");
      return kExitViolation;
    }
  }
  return kExitOk;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string task;
  std::string algo;
  std::string demos_path;
  std::string potential_path;
  std::string shapes_dir = "data/shapes";
  long steps = 200000;
  std::uint64_t seed = 1;
  double gamma_k = 0.97;
  std::string out_dir;
  bool resume = false;
};

int cmd_train(const TrainArgs& args) {
  std::string shape;
  int radius = 0;
  parse_task_arg(args.task, &shape, &radius);

  const crsfd::Algo algo = crsfd::algo_from_name(args.algo);
  if (algo == crsfd::Algo::kCrsfd && args.potential_path.empty())
    throw std::invalid_argument("crsfd needs --potential (fit one with fit-value first)");
  if (algo != crsfd::Algo::kCrsfd && !args.potential_path.empty())
    throw std::invalid_argument("--potential only applies to --algo crsfd");
  if (algo != crsfd::Algo::kSac && args.demos_path.empty())
    throw std::invalid_argument(std::string(crsfd::algo_name(algo)) +
                                " needs --demos (generate with gen-demos first)");

  crsfd::DemoSet demos;
  bool have_demos = false;
  if (!args.demos_path.empty()) {
    require_file(args.demos_path, "demo file");
    demos = crsfd::demos_from_json(crsfd::read_json_file(args.demos_path));
    have_demos = true;
  }
  if (algo == crsfd::Algo::kSac && have_demos)
    std::printf("warning: sac ignores demonstrations; the provided demo set was not used\n");

  crsfd::PotentialFn potential;
  if (!args.potential_path.empty()) {
    require_file(args.potential_path, "potential file");
    potential = crsfd::potential_from_json(crsfd::read_json_file(args.potential_path));
  }

  crsfd::GridPegSpec spec;
  spec.shape = crsfd::load_shape(args.shapes_dir, shape);
  auto env = crsfd::make_shift_randomized_task(spec, radius);
  auto eval_env = crsfd::make_shift_randomized_task(spec, radius);

  crsfd::LearnerConfig cfg;
  cfg.gamma = args.gamma_k;
  cfg.total_env_steps = args.steps;
  cfg.validate();

  crsfd::RunOptions opts;
  opts.checkpoint_path = args.out_dir + "/checkpoint.json";
  opts.resume = args.resume;

  const auto t0 = std::chrono::steady_clock::now();
  crsfd::RunResult result;
  if (algo == crsfd::Algo::kCrsfd) {
    result = crsfd::run_crsfd(*env, *eval_env, demos, potential, cfg, args.seed, opts);
  } else {
    result = crsfd::run_baseline(algo, *env, *eval_env, have_demos ? &demos : nullptr, cfg,
                                 args.seed, opts);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  crsfd::json meta;
  meta["task"] =
      crsfd::json{{"shape", shape}, {"radius", radius}, {"task_id", spec.task_id(radius)}};
  meta["algo"] = args.algo;
  meta["seed"] = args.seed;
  meta["gamma_k"] = args.gamma_k;
  if (have_demos && algo != crsfd::Algo::kSac)
    meta["demo_digest"] = crsfd::sha1_hex(crsfd::demos_to_json(demos).dump());
  if (algo == crsfd::Algo::kCrsfd)
    meta["potential_digest"] = crsfd::sha1_hex(crsfd::potential_to_json(potential).dump());
  meta["wall_seconds"] = secs;
  meta = crsfd::write_run_artifacts(args.out_dir, result, std::move(meta));

  for (const auto& w : result.warnings) std::printf("warning: %s\n", w.c_str());
  std::printf("%s on %s: %ld env steps, %ld updates, %ld episodes%s in %.1fs\n",
              args.algo.c_str(), spec.task_id(radius).c_str(), result.env_steps, result.updates,
              result.episodes, result.resumed ? " (resumed)" : "", secs);
  std::printf("final success %.3f, auc %.3f -> %s\n", meta.at("final_success").get<double>(),
              meta.at("auc").get<double>(), (args.out_dir + "/run_meta.json").c_str());
  return kExitOk;
}

// --- verify ------------------------------------------------------------------

struct VerifyArgs {
  std::string mode;
  int n_random = 0;  // 0 -> per-mode default
  std::uint64_t seed = 1;
  std::string out = "verify_report.json";
  // transfer-bound instance parameters
  std::string shapes_dir = "data/shapes";
  std::string source_shape = "0";
  std::string target_shape = "0";
  int radius = 0;
  int n_traj = 40;
  int horizon = 50;
  double noise = 0.0;
  double gamma0 = 0.9;
  double gamma_k = 0.97;
  double lambda = 1.0;
  // telescoping inputs
  std::string demos_path;
  std::string potential_path;
};

int verify_invariance_mode(const VerifyArgs& args) {
  const int n_cases = args.n_random > 0 ? args.n_random : 100;
  std::mt19937_64 rng = crsfd::make_rng(args.seed, 17);
  int failures = 0;
  double worst_q_err = 0.0;
  crsfd::json cases = crsfd::json::array();
  for (int i = 0; i < n_cases; ++i) {
    const crsfd::TabularMDP mdp = crsfd::random_tabular_mdp(rng, 20, 4);
    std::vector<double> phi(static_cast<std::size_t>(mdp.n_states));
    for (auto& v : phi) v = 2.0 * crsfd::rand_double(rng) - 1.0;
    const crsfd::InvarianceReport rep = crsfd::verify_invariance(mdp, phi, 1e-8);
    worst_q_err = std::max(worst_q_err, rep.max_q_shift_error);
    if (!rep.pass) {
      ++failures;
      cases.push_back(crsfd::json{{"case", i},
                                  {"policies_equal", rep.policies_equal},
                                  {"max_q_shift_error", rep.max_q_shift_error}});
    }
  }
  crsfd::json report;
  report["mode"] = args.mode;
  report["n_cases"] = n_cases;
  report["seed"] = args.seed;
  report["tolerance"] = 1e-8;
  report["max_q_shift_error"] = worst_q_err;
  report["failures"] = failures;
  report["failing_cases"] = std::move(cases);
  report["pass"] = failures == 0;
  crsfd::write_json_file(args.out, report);
  std::printf("invariance: %d/%d random tasks pass, max |Q' - (Q - Phi)| = %.3g -> %s\n",
              n_cases - failures, n_cases, worst_q_err, args.out.c_str());
  return failures == 0 ? kExitOk : kExitViolation;
}

int verify_transfer_bound_mode(const VerifyArgs& args) {
  crsfd::GridPegSpec spec0;
  spec0.shape = crsfd::load_shape(args.shapes_dir, args.source_shape);
  spec0.horizon = args.horizon;
  spec0.validate(0);

  const crsfd::DemoSet demos = crsfd::collect_demos(spec0, args.n_traj, args.horizon, args.noise,
                                                    args.gamma0, args.seed);
  crsfd::ValueFitConfig cfg;
  cfg.backend = crsfd::FitBackend::kTabular;
  cfg.gamma0 = args.gamma0;
  cfg.lambda = args.lambda;
  cfg.ood_sampler = crsfd::OodSampler::from_spec(spec0);
  const crsfd::PotentialFn potential =
      crsfd::fit_conservative(demos, cfg, args.seed).potential;

  // The shifted instance places the hole at offset (radius, radius), the
  // corner of the shift box.
  crsfd::GridPegSpec speck = spec0;
  speck.shape = crsfd::load_shape(args.shapes_dir, args.target_shape);
  speck.offset_dx = args.radius;
  speck.offset_dy = args.radius;
  speck.validate(0);

  // The bound is stated for a pair sharing one reward function and differing
  // in dynamics, so the shifted tensor keeps the source task's reward.
  const crsfd::TabularMDP mdp0 = crsfd::to_tabular(spec0, args.gamma0);
  const crsfd::TabularMDP mdpk = crsfd::to_tabular_shared_reward(speck, spec0, args.gamma_k);
  const crsfd::MismatchReport rep = crsfd::verify_transfer_bound(
      mdp0, mdpk, demos, potential, args.gamma0, args.gamma_k, 1e-10);

  double min_margin = 0.0;
  for (std::size_t i = 0; i < rep.rows.size(); ++i)
    min_margin = i == 0 ? rep.rows[i].margin : std::min(min_margin, rep.rows[i].margin);
  const std::string branch = rep.delta == 0.0          ? "delta-zero"
                             : rep.delta < rep.threshold ? "positivity"
                                                         : "general";

  crsfd::json report;
  report["mode"] = args.mode;
  report["source_task"] = spec0.task_id(0);
  report["target_task"] = speck.task_id(0);
  report["seed"] = args.seed;
  report["gamma0"] = args.gamma0;
  report["gamma_k"] = args.gamma_k;
  report["delta"] = rep.delta;
  report["max_potential"] = rep.max_value;
  report["positivity_threshold"] = rep.threshold;
  report["branch"] = branch;
  report["n_support_states"] = rep.rows.size();
  report["excluded_states"] = rep.excluded_states;
  report["min_margin"] = min_margin;
  report["pass"] = rep.all_pass;
  crsfd::write_json_file(args.out, report);

  std::printf("%s", rep.table().c_str());
  std::printf("transfer bound %s vs %s: delta = %.6g (%s branch), %zu support states, %s -> %s\n",
              spec0.task_id(0).c_str(), speck.task_id(0).c_str(), rep.delta, branch.c_str(),
              rep.rows.size(), rep.all_pass ? "all pass" : "VIOLATED", args.out.c_str());
  return rep.all_pass ? kExitOk : kExitViolation;
}

int verify_telescoping_mode(const VerifyArgs& args) {
  constexpr double kTol = 1e-12;
  std::mt19937_64 rng = crsfd::make_rng(args.seed, 23);

  std::vector<crsfd::Trajectory> trajectories;
  std::string source = "synthetic";
  if (!args.demos_path.empty()) {
    require_file(args.demos_path, "trajectory file");
    const crsfd::DemoSet demos = crsfd::demos_from_json(crsfd::read_json_file(args.demos_path));
    trajectories = demos.trajectories;
    source = args.demos_path;
  }
  const int n_random = args.n_random > 0 ? args.n_random : (trajectories.empty() ? 1000 : 0);
  int max_state = 0;
  for (const auto& traj : trajectories)
    for (const auto& t : traj.transitions)
      max_state = std::max({max_state, t.state, t.next_state});
  const int n_states = std::max(max_state + 1, 50);
  for (int i = 0; i < n_random; ++i)
    trajectories.push_back(crsfd::random_trajectory(rng, n_states, 20));
  if (trajectories.empty())
    throw std::invalid_argument("telescoping mode needs --demos or --n-random > 0");

  crsfd::PotentialFn potential;
  if (!args.potential_path.empty()) {
    require_file(args.potential_path, "potential file");
    potential = crsfd::potential_from_json(crsfd::read_json_file(args.potential_path));
  } else {
    std::vector<double> phi(static_cast<std::size_t>(n_states));
    for (auto& v : phi) v = 2.0 * crsfd::rand_double(rng) - 1.0;
    potential = crsfd::PotentialFn::tabular(std::move(phi));
  }

  double max_err = 0.0;
  for (const auto& traj : trajectories) {
    const auto identity = crsfd::shaped_return_identity(traj, potential, args.gamma_k);
    max_err = std::max(max_err, std::abs(identity.lhs - identity.rhs));
  }

  crsfd::json report;
  report["mode"] = args.mode;
  report["source"] = source;
  report["n_trajectories"] = trajectories.size();
  report["gamma"] = args.gamma_k;
  report["seed"] = args.seed;
  report["tolerance"] = kTol;
  report["max_abs_error"] = max_err;
  report["pass"] = max_err <= kTol;
  crsfd::write_json_file(args.out, report);
  std::printf("telescoping: %zu trajectories, max |lhs - rhs| = %.3g (tol %.0e) -> %s\n",
              trajectories.size(), max_err, kTol, args.out.c_str());
  return max_err <= kTol ? kExitOk : kExitViolation;
}

int cmd_verify(const VerifyArgs& args) {
  if (args.mode == "invariance") return verify_invariance_mode(args);
  if (args.mode == "transfer-bound") return verify_transfer_bound_mode(args);
  if (args.mode == "telescoping") return verify_telescoping_mode(args);
  throw std::invalid_argument("unknown --mode '" + args.mode +
                              "' (expected invariance, transfer-bound, or telescoping)");
}

// --- sweep / ablate / audit ---------------------------------------------------

struct SweepArgs {
  std::string plan_path;
  std::string out_dir;  // override
  int threads = -1;     // override when >= 0
  bool resume = false;
  // ablate toggles
  bool no_ood_regression = false;
  bool no_large_gamma = false;
};

crsfd::ExperimentPlan load_plan(const SweepArgs& args) {
  require_file(args.plan_path, "plan file");
  crsfd::ExperimentPlan plan = crsfd::plan_from_json(crsfd::read_json_file(args.plan_path));
  if (!args.out_dir.empty()) plan.out_dir = args.out_dir;
  if (args.threads >= 0) plan.threads = args.threads;
  if (args.resume) plan.resume = true;
  plan.validate();
  return plan;
}

int report_sweep(const crsfd::SweepResult& result, const std::string& table_name) {
  int ok = 0, failed = 0, skipped = 0;
  for (const auto& run : result.runs) {
    if (!run.ok)
      ++failed;
    else if (run.skipped)
      ++skipped;
    else
      ++ok;
  }
  std::printf("%d runs complete (%d reused), %d failed -> %s/%s\n", ok + skipped, skipped, failed,
              result.out_dir.c_str(), table_name.c_str());
  for (const auto& run : result.runs)
    if (!run.ok)
      std::fprintf(stderr, "failed: %s r%d %s seed %llu: %s\n", run.shape.c_str(), run.radius,
                   run.algo.c_str(), static_cast<unsigned long long>(run.seed),
                   run.error.c_str());
  // Every planned run must have produced its artifact directory.
  for (const auto& run : result.runs)
    if (run.ok && !std::filesystem::exists(run.dir + "/run_meta.json")) {
      std::fprintf(stderr, "missing artifacts for %s\n", run.dir.c_str());
      ++failed;
    }
  return failed == 0 ? kExitOk : kExitPartialFailure;
}

int cmd_sweep(const SweepArgs& args) {
  const crsfd::ExperimentPlan plan = load_plan(args);
  const crsfd::SweepResult result = crsfd::run_sweep(plan);
  return report_sweep(result, "summary.md");
}

int cmd_ablate(const SweepArgs& args) {
  const crsfd::ExperimentPlan plan = load_plan(args);
  std::vector<std::string> only;
  if (args.no_ood_regression && args.no_large_gamma)
    only = {"full", "neither"};
  else if (args.no_ood_regression)
    only = {"full", "no_ood_regression"};
  else if (args.no_large_gamma)
    only = {"full", "no_large_gamma"};
  const crsfd::SweepResult result = crsfd::run_ablation(plan, only);
  return report_sweep(result, "ablation_summary.md");
}

int cmd_audit(const std::string& out_dir) {
  const crsfd::AuditResult result = crsfd::audit_out_dir(out_dir);
  for (const auto& m : result.messages) std::printf("%s\n", m.c_str());
  std::printf("audit %s\n", result.ok ? "clean" : "FAILED");
  return result.ok ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GridPeg transfer benchmark: conservative-potential reward shaping"};
  app.require_subcommand(1);

  GenDemosArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-demos", "Collect noisy-oracle demonstrations");
  gen_cmd->add_option("--shape", gen.shape, "Shape stencil id")->required();
  gen_cmd->add_option("--shapes-dir", gen.shapes_dir, "Stencil directory");
  gen_cmd->add_option("--n-traj", gen.n_traj, "Number of successful trajectories")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--horizon", gen.horizon, "Episode step cap")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--noise", gen.noise, "Uniform-random action probability")
      ->check(CLI::Range(0.0, 0.999));
  gen_cmd->add_option("--gamma0", gen.gamma0, "Discount stored with the demos")
      ->check(CLI::Range(1e-9, 0.999999));
  gen_cmd->add_option("--seed", gen.seed, "Collection seed");
  gen_cmd->add_option("--out", gen.out, "Output demo JSON path")->required();

  FitValueArgs fit;
  CLI::App* fit_cmd = app.add_subcommand("fit-value", "Fit the conservative demo-value potential");
  fit_cmd->add_option("--demos", fit.demos_path, "Demo JSON from gen-demos")->required();
  fit_cmd->add_option("--shapes-dir", fit.shapes_dir, "Stencil directory");
  fit_cmd->add_option("--lambda", fit.lambda, "Weight of the push-to-zero term")
      ->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--steps", fit.steps, "Regression steps (mlp backend)")
      ->check(CLI::PositiveNumber);
  fit_cmd->add_option("--backend", fit.backend, "tabular or mlp")
      ->check(CLI::IsMember({"tabular", "mlp"}));
  fit_cmd->add_option("--seed", fit.seed, "Fit seed");
  fit_cmd->add_option("--out", fit.out, "Output potential JSON path")->required();
  fit_cmd->add_option("--loss-out", fit.loss_out, "Loss CSV path (default <out>.loss.csv)");

  TrainArgs train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train one agent on one task");
  train_cmd->add_option("--task", train.task, "Target task, SHAPE or SHAPE:RADIUS")->required();
  train_cmd->add_option("--algo", train.algo, "crsfd, sacfd, sac, sqil, or bc")->required();
  train_cmd->add_option("--demos", train.demos_path, "Demo JSON (all algorithms except sac)");
  train_cmd->add_option("--potential", train.potential_path, "Potential JSON (crsfd only)");
  train_cmd->add_option("--shapes-dir", train.shapes_dir, "Stencil directory");
  train_cmd->add_option("--steps", train.steps, "Environment step budget")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train.seed, "Run seed");
  train_cmd->add_option("--gamma-k", train.gamma_k, "Training discount (shaping discount)")
      ->check(CLI::Range(1e-9, 0.999999));
  train_cmd->add_option("--out-dir", train.out_dir, "Artifact directory")->required();
  train_cmd->add_flag("--resume", train.resume, "Resume from the last checkpoint if present");

  VerifyArgs verify;
  CLI::App* verify_cmd = app.add_subcommand("verify", "Check the shaping guarantees");
  verify_cmd
      ->add_option("--mode", verify.mode, "invariance, transfer-bound, or telescoping")
      ->required();
  verify_cmd->add_option("--n-random", verify.n_random, "Random case count (0 = mode default)")
      ->check(CLI::NonNegativeNumber);
  verify_cmd->add_option("--seed", verify.seed, "Case generation seed");
  verify_cmd->add_option("--out", verify.out, "Report JSON path");
  verify_cmd->add_option("--shapes-dir", verify.shapes_dir, "Stencil directory");
  verify_cmd->add_option("--source-shape", verify.source_shape, "Demo task stencil");
  verify_cmd->add_option("--target-shape", verify.target_shape, "Shifted task stencil");
  verify_cmd->add_option("--radius", verify.radius, "Target hole offset (radius, radius)")
      ->check(CLI::NonNegativeNumber);
  verify_cmd->add_option("--n-traj", verify.n_traj, "Demo count for the bound check")
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--horizon", verify.horizon, "Demo horizon")
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--noise", verify.noise, "Demo action noise")
      ->check(CLI::Range(0.0, 0.999));
  verify_cmd->add_option("--gamma0", verify.gamma0, "Source discount")
      ->check(CLI::Range(1e-9, 0.999999));
  verify_cmd->add_option("--gamma-k", verify.gamma_k, "Target/shaping discount")
      ->check(CLI::Range(1e-9, 0.999999));
  verify_cmd->add_option("--lambda", verify.lambda, "Conservative fit weight")
      ->check(CLI::NonNegativeNumber);
  verify_cmd->add_option("--demos", verify.demos_path, "Stored trajectories (telescoping)");
  verify_cmd->add_option("--potential", verify.potential_path, "Potential JSON (telescoping)");

  SweepArgs sweep;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a full experiment plan");
  sweep_cmd->add_option("plan", sweep.plan_path, "Plan JSON file")->required();
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "Override the plan's output directory");
  sweep_cmd->add_option("--threads", sweep.threads, "Worker thread count (0 = all cores)");
  sweep_cmd->add_flag("--resume", sweep.resume, "Reuse finished runs, checkpoint the rest");

  SweepArgs ablate;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "Run the shaping ablation grid");
  ablate_cmd->add_option("plan", ablate.plan_path, "Plan JSON file")->required();
  ablate_cmd->add_option("--out-dir", ablate.out_dir, "Override the plan's output directory");
  ablate_cmd->add_option("--threads", ablate.threads, "Worker thread count (0 = all cores)");
  ablate_cmd->add_flag("--resume", ablate.resume, "Reuse finished runs, checkpoint the rest");
  ablate_cmd->add_flag("--no-ood-regression", ablate.no_ood_regression,
                       "Only compare against the lambda = 0 variant");
  ablate_cmd->add_flag("--no-large-gamma", ablate.no_large_gamma,
                       "Only compare against the gamma_k = gamma0 + 1e-6 variant");

  std::string audit_dir = "out";
  CLI::App* audit_cmd =
      app.add_subcommand("audit", "Recompute aggregates from raw curves and compare");
  audit_cmd->add_option("--out-dir", audit_dir, "Sweep output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_demos(gen);
    if (fit_cmd->parsed()) return cmd_fit_value(fit);
    if (train_cmd->parsed()) return cmd_train(train);
    if (verify_cmd->parsed()) return cmd_verify(verify);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate);
    if (audit_cmd->parsed()) return cmd_audit(audit_dir);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitViolation;
  }
  return kExitUsage;
}
