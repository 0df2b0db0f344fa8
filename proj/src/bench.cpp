#include "crsfd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "crsfd/rng.hpp"

namespace crsfd {

namespace {

json learner_cfg_to_json(const LearnerConfig& cfg) {
  json j;
  j["backend"] = cfg.backend == CriticBackend::kTabular ? "tabular" : "mlp";
  j["gamma"] = cfg.gamma;
  j["temperature"] = cfg.temperature;
  j["q_init"] = cfg.q_init;
  j["tau"] = cfg.tau;
  j["target_period"] = cfg.target_period;
  j["batch"] = cfg.batch;
  j["critic_lr"] = cfg.critic_lr;
  j["critic_lr_decay"] = cfg.critic_lr_decay;
  j["total_env_steps"] = cfg.total_env_steps;
  j["updates_per_episode"] = cfg.updates_per_episode;
  j["expert_ratio"] = cfg.expert_ratio;
  j["ratio_decay"] = cfg.ratio_decay;
  j["ratio_decay_period"] = cfg.ratio_decay_period;
  j["pretrain_updates"] = cfg.pretrain_updates;
  j["eval_period"] = cfg.eval_period;
  j["eval_episodes"] = cfg.eval_episodes;
  j["horizon"] = cfg.horizon;
  j["agent_capacity"] = cfg.agent_capacity;
  j["mlp_hidden"] = cfg.mlp_hidden;
  j["mlp_lr"] = cfg.mlp_lr;
  j["bc_updates"] = cfg.bc_updates;
  return j;
}

void learner_cfg_from_json(const json& j, LearnerConfig& cfg) {
  if (j.contains("backend"))
    cfg.backend = j.at("backend").get<std::string>() == "mlp" ? CriticBackend::kMlp
                                                              : CriticBackend::kTabular;
  if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
  if (j.contains("temperature")) cfg.temperature = j.at("temperature").get<double>();
  if (j.contains("q_init")) cfg.q_init = j.at("q_init").get<double>();
  if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
  if (j.contains("target_period")) cfg.target_period = j.at("target_period").get<int>();
  if (j.contains("batch")) cfg.batch = j.at("batch").get<int>();
  if (j.contains("critic_lr")) cfg.critic_lr = j.at("critic_lr").get<double>();
  if (j.contains("critic_lr_decay")) cfg.critic_lr_decay = j.at("critic_lr_decay").get<double>();
  if (j.contains("total_env_steps")) cfg.total_env_steps = j.at("total_env_steps").get<long>();
  if (j.contains("updates_per_episode"))
    cfg.updates_per_episode = j.at("updates_per_episode").get<int>();
  if (j.contains("expert_ratio")) cfg.expert_ratio = j.at("expert_ratio").get<double>();
  if (j.contains("ratio_decay")) cfg.ratio_decay = j.at("ratio_decay").get<double>();
  if (j.contains("ratio_decay_period"))
    cfg.ratio_decay_period = j.at("ratio_decay_period").get<int>();
  if (j.contains("pretrain_updates")) cfg.pretrain_updates = j.at("pretrain_updates").get<int>();
  if (j.contains("eval_period")) cfg.eval_period = j.at("eval_period").get<long>();
  if (j.contains("eval_episodes")) cfg.eval_episodes = j.at("eval_episodes").get<int>();
  if (j.contains("horizon")) cfg.horizon = j.at("horizon").get<int>();
  if (j.contains("agent_capacity")) cfg.agent_capacity = j.at("agent_capacity").get<std::size_t>();
  if (j.contains("mlp_hidden")) cfg.mlp_hidden = j.at("mlp_hidden").get<std::vector<int>>();
  if (j.contains("mlp_lr")) cfg.mlp_lr = j.at("mlp_lr").get<double>();
  if (j.contains("bc_updates")) cfg.bc_updates = j.at("bc_updates").get<int>();
}

json value_fit_to_json(const ValueFitConfig& cfg) {
  json j;
  j["backend"] = cfg.backend == FitBackend::kTabular ? "tabular" : "mlp";
  j["lambda"] = cfg.lambda;
  j["n_regress_steps"] = cfg.n_regress_steps;
  j["batch_demo"] = cfg.batch_demo;
  j["batch_ood"] = cfg.batch_ood;
  j["learning_rate"] = cfg.learning_rate;
  j["mlp_hidden"] = cfg.mlp_hidden;
  return j;
}

void value_fit_from_json(const json& j, ValueFitConfig& cfg) {
  if (j.contains("backend"))
    cfg.backend =
        j.at("backend").get<std::string>() == "mlp" ? FitBackend::kMlp : FitBackend::kTabular;
  if (j.contains("lambda")) cfg.lambda = j.at("lambda").get<double>();
  if (j.contains("n_regress_steps")) cfg.n_regress_steps = j.at("n_regress_steps").get<int>();
  if (j.contains("batch_demo")) cfg.batch_demo = j.at("batch_demo").get<int>();
  if (j.contains("batch_ood")) cfg.batch_ood = j.at("batch_ood").get<int>();
  if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("mlp_hidden")) cfg.mlp_hidden = j.at("mlp_hidden").get<std::vector<int>>();
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

// Demos and the fitted potential always come from the source task; target
// tasks only supply the training environment.
struct SourceAssets {
  GridPegSpec spec0;
  DemoSet demos;
  PotentialFn potential;
  bool has_potential = false;
  std::string demo_digest;
  std::string potential_digest;
  bool ok = false;
  std::string error;
};

GridPegSpec nominal_spec(const ExperimentPlan& plan, const std::string& shape_id) {
  GridPegSpec spec;
  spec.shape = load_shape(plan.shapes_dir, shape_id);
  spec.offset_dx = 0;
  spec.offset_dy = 0;
  spec.slip_prob = plan.slip;
  spec.horizon = plan.demo_horizon;
  return spec;
}

PotentialFn fit_potential_for(const ExperimentPlan& plan, const GridPegSpec& spec0,
                              const DemoSet& demos, double lambda, FitBackend backend) {
  ValueFitConfig cfg = plan.value_fit;
  cfg.backend = backend;
  cfg.lambda = lambda;
  cfg.gamma0 = plan.gamma0;
  cfg.ood_sampler = OodSampler::from_spec(spec0);
  cfg.featurizer = Featurizer{spec0.width, spec0.height};
  FitResult fit = fit_conservative(demos, cfg, plan.fit_seed);
  return fit.potential;
}

SourceAssets build_source_assets(const ExperimentPlan& plan, bool need_potential,
                                 FitBackend backend) {
  SourceAssets assets;
  try {
    assets.spec0 = nominal_spec(plan, plan.source_shape);
    assets.spec0.validate(0);
    assets.demos = collect_demos(assets.spec0, plan.n_demos, plan.demo_horizon, plan.demo_noise,
                                 plan.gamma0, plan.demo_seed);
    assets.demo_digest = sha1_hex(demos_to_json(assets.demos).dump());
    if (need_potential) {
      assets.potential =
          fit_potential_for(plan, assets.spec0, assets.demos, plan.value_fit.lambda, backend);
      assets.potential_digest = sha1_hex(potential_to_json(assets.potential).dump());
      assets.has_potential = true;
    }
    assets.ok = true;
  } catch (const std::exception& e) {
    assets.ok = false;
    assets.error = e.what();
  }
  return assets;
}

struct Job {
  std::string shape;  // target task shape
  int radius = 0;
  std::string algo;  // plain name, or "crsfd/<variant>" for ablations
  std::uint64_t seed = 0;
  std::string dir;
  // ablation knobs; unused for plain sweep jobs
  double gamma_override = 0.0;
  const PotentialFn* potential = nullptr;
  std::string potential_digest;
  std::string variant;
  std::vector<std::string> toggles;
};

RunOutcome finished_outcome_from_meta(const Job& job, const json& meta) {
  RunOutcome oc;
  oc.shape = job.shape;
  oc.radius = job.radius;
  oc.algo = job.algo;
  oc.seed = job.seed;
  oc.dir = job.dir;
  oc.auc = meta.at("auc").get<double>();
  oc.final_success = meta.at("final_success").get<double>();
  oc.final_return = meta.at("final_return").get<double>();
  oc.ok = true;
  oc.skipped = true;
  return oc;
}

RunOutcome execute_job(const ExperimentPlan& plan, const SourceAssets& assets, const Job& job) {
  RunOutcome oc;
  oc.shape = job.shape;
  oc.radius = job.radius;
  oc.algo = job.algo;
  oc.seed = job.seed;
  oc.dir = job.dir;
  try {
    if (!assets.ok) throw std::runtime_error("source task setup failed: " + assets.error);
    const std::string meta_path = job.dir + "/run_meta.json";
    if (plan.resume && std::filesystem::exists(meta_path))
      return finished_outcome_from_meta(job, read_json_file(meta_path));

    const GridPegSpec target = nominal_spec(plan, job.shape);
    auto env = make_shift_randomized_task(target, job.radius);
    auto eval_env = make_shift_randomized_task(target, job.radius);

    LearnerConfig cfg = plan.learner;
    if (job.gamma_override > 0.0) cfg.gamma = job.gamma_override;

    RunOptions opts;
    if (plan.resume) {
      opts.checkpoint_path = job.dir + "/checkpoint.json";
      opts.resume = true;
      opts.checkpoint_period_episodes = 200;
    }

    const bool shaped = job.algo.rfind("crsfd", 0) == 0;
    const PotentialFn* phi = job.potential != nullptr ? job.potential
                             : assets.has_potential   ? &assets.potential
                                                      : nullptr;
    RunResult result;
    if (shaped) {
      if (phi == nullptr) throw std::runtime_error("no potential available for a shaped run");
      result = run_crsfd(*env, *eval_env, assets.demos, *phi, cfg, job.seed, opts);
    } else {
      const Algo algo = algo_from_name(job.algo);
      const DemoSet* demos = algo == Algo::kSac ? nullptr : &assets.demos;
      result = run_baseline(algo, *env, *eval_env, demos, cfg, job.seed, opts);
    }

    json meta;
    meta["task"] = json{{"shape", job.shape},
                        {"radius", job.radius},
                        {"task_id", target.task_id(job.radius)}};
    meta["source_task"] = assets.demos.source_task;
    meta["algo"] = job.algo;
    if (!job.variant.empty()) meta["variant"] = job.variant;
    if (!job.toggles.empty()) meta["toggles"] = job.toggles;
    meta["seed"] = job.seed;
    meta["demo_digest"] = assets.demo_digest;
    meta["potential_digest"] =
        !shaped ? "" : (job.potential != nullptr ? job.potential_digest : assets.potential_digest);
    meta["learner"] = learner_cfg_to_json(cfg);
    meta = write_run_artifacts(job.dir, result, std::move(meta));

    oc.auc = meta.at("auc").get<double>();
    oc.final_success = meta.at("final_success").get<double>();
    oc.final_return = meta.at("final_return").get<double>();
    oc.ok = true;
  } catch (const std::exception& e) {
    oc.ok = false;
    oc.error = e.what();
  }
  return oc;
}

std::vector<RunOutcome> run_jobs(const ExperimentPlan& plan, const SourceAssets& assets,
                                 const std::vector<Job>& jobs) {
  std::vector<RunOutcome> outcomes(jobs.size());
  std::atomic<std::size_t> next{0};
  int n_threads =
      plan.threads > 0 ? plan.threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(jobs.size())));

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      outcomes[i] = execute_job(plan, assets, jobs[i]);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return outcomes;
}

void write_outcome_csv(const std::string& path, const std::vector<RunOutcome>& outcomes) {
  std::ostringstream out;
  out << "shape,radius,algo,seed,auc,final_success,final_return,status,dir\n";
  for (const auto& oc : outcomes) {
    out << oc.shape << ',' << oc.radius << ',' << oc.algo << ',' << oc.seed << ','
        << format_double(oc.auc) << ',' << format_double(oc.final_success) << ','
        << format_double(oc.final_return) << ',' << (oc.ok ? "ok" : "failed") << ',' << oc.dir
        << '\n';
  }
  write_text_file(path, out.str());
}

using CellKey = std::tuple<std::string, int, std::string>;  // shape, radius, algo

std::map<CellKey, std::vector<const RunOutcome*>> group_outcomes(
    const std::vector<RunOutcome>& outcomes) {
  std::map<CellKey, std::vector<const RunOutcome*>> cells;
  for (const auto& oc : outcomes)
    if (oc.ok) cells[{oc.shape, oc.radius, oc.algo}].push_back(&oc);
  return cells;
}

std::string cell_text(const std::map<CellKey, std::vector<const RunOutcome*>>& cells,
                      const std::string& shape, int radius, const std::string& algo, bool use_auc) {
  const auto it = cells.find({shape, radius, algo});
  if (it == cells.end()) return "-";
  std::vector<double> xs;
  for (const RunOutcome* oc : it->second) xs.push_back(use_auc ? oc->auc : oc->final_success);
  return fixed3(mean_of(xs)) + " ± " + fixed3(std_of(xs));
}

double cell_mean(const std::map<CellKey, std::vector<const RunOutcome*>>& cells,
                 const std::string& shape, int radius, const std::string& algo, bool use_auc,
                 bool* present) {
  const auto it = cells.find({shape, radius, algo});
  if (it == cells.end()) {
    if (present) *present = false;
    return 0.0;
  }
  if (present) *present = true;
  std::vector<double> xs;
  for (const RunOutcome* oc : it->second) xs.push_back(use_auc ? oc->auc : oc->final_success);
  return mean_of(xs);
}

void write_sweep_summary(const ExperimentPlan& plan, const std::vector<RunOutcome>& outcomes) {
  const auto cells = group_outcomes(outcomes);
  std::ostringstream md;
  md << "# Transfer panel\n\n";
  md << "Demos from shape \"" << plan.source_shape << "\"; target shapes x shift radii; "
     << plan.seeds.size() << " seeds per cell, " << plan.learner.total_env_steps
     << " env steps per run.\n";

  for (const bool use_auc : {false, true}) {
    md << "\n## " << (use_auc ? "Success AUC" : "Final success rate")
       << " (mean ± std over seeds)\n\n";
    md << "| shape | radius |";
    for (const auto& algo : plan.algos) md << ' ' << algo << " |";
    md << "\n|---|---|";
    for (std::size_t i = 0; i < plan.algos.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& shape : plan.shapes) {
      for (int radius : plan.radii) {
        md << "| " << shape << " | " << radius << " |";
        for (const auto& algo : plan.algos)
          md << ' ' << cell_text(cells, shape, radius, algo, use_auc) << " |";
        md << '\n';
      }
    }
  }

  const bool have_crsfd =
      std::find(plan.algos.begin(), plan.algos.end(), "crsfd") != plan.algos.end();
  const bool have_sacfd =
      std::find(plan.algos.begin(), plan.algos.end(), "sacfd") != plan.algos.end();
  if (have_crsfd && have_sacfd) {
    md << "\n## Shaping margin (crsfd - sacfd, mean final success)\n\n";
    md << "| radius |";
    for (const auto& shape : plan.shapes) md << " shape " << shape << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < plan.shapes.size(); ++i) md << "---|";
    md << '\n';
    for (int radius : plan.radii) {
      md << "| " << radius << " |";
      for (const auto& shape : plan.shapes) {
        bool a = false, b = false;
        const double ma = cell_mean(cells, shape, radius, "crsfd", false, &a);
        const double mb = cell_mean(cells, shape, radius, "sacfd", false, &b);
        if (a && b)
          md << ' ' << fixed3(ma - mb) << " |";
        else
          md << " - |";
      }
      md << '\n';
    }
  }

  md << "\n## Failures\n\n";
  bool any = false;
  for (const auto& oc : outcomes) {
    if (oc.ok) continue;
    any = true;
    md << "- " << oc.shape << " r" << oc.radius << ' ' << oc.algo << " seed " << oc.seed << ": "
       << oc.error << '\n';
  }
  if (!any) md << "none\n";
  write_text_file(plan.out_dir + "/summary.md", md.str());
}

// --- audit helpers ---------------------------------------------------------

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    rows.push_back(std::move(fields));
  }
  return rows;
}

struct CurveStats {
  double auc = 0.0;
  double final_success = 0.0;
  double final_return = 0.0;
  long n_rows = 0;
};

CurveStats stats_from_curves_csv(const std::string& path) {
  const auto rows = read_csv_rows(path);
  if (rows.empty() || rows[0].size() < 3)
    throw std::runtime_error("malformed curves file: " + path);
  CurveStats st;
  double acc = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 3) throw std::runtime_error("short row in " + path);
    const double sr = std::stod(rows[i][1]);
    acc += sr;
    st.final_success = sr;
    st.final_return = std::stod(rows[i][2]);
    ++st.n_rows;
  }
  st.auc = st.n_rows > 0 ? acc / static_cast<double>(st.n_rows) : 0.0;
  return st;
}

void audit_outcome_csv(const std::string& out_dir, const std::string& csv_name,
                       AuditResult& result) {
  const std::string path = out_dir + "/" + csv_name;
  if (!std::filesystem::exists(path)) return;
  const auto rows = read_csv_rows(path);
  if (rows.empty()) {
    result.ok = false;
    result.messages.push_back(csv_name + " is empty");
    return;
  }
  long checked = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() < 9) {
      result.ok = false;
      result.messages.push_back(csv_name + " row " + std::to_string(i) + " is malformed");
      continue;
    }
    const std::string label = row[0] + " r" + row[1] + " " + row[2] + " seed " + row[3];
    if (row[7] != "ok") {
      result.messages.push_back(label + ": recorded as failed (" + csv_name + ")");
      continue;
    }
    try {
      const CurveStats st = stats_from_curves_csv(row[8] + "/curves.csv");
      const double auc = std::stod(row[4]);
      const double fs = std::stod(row[5]);
      const double fr = std::stod(row[6]);
      if (std::abs(st.auc - auc) > 1e-9 || std::abs(st.final_success - fs) > 1e-9 ||
          std::abs(st.final_return - fr) > 1e-9) {
        result.ok = false;
        result.messages.push_back(label + ": aggregate row does not match its curves");
      }
      const json meta = read_json_file(row[8] + "/run_meta.json");
      if (std::abs(meta.at("auc").get<double>() - st.auc) > 1e-9 ||
          std::abs(meta.at("final_success").get<double>() - st.final_success) > 1e-9) {
        result.ok = false;
        result.messages.push_back(label + ": run_meta.json does not match its curves");
      }
      ++checked;
    } catch (const std::exception& e) {
      result.ok = false;
      result.messages.push_back(label + ": " + std::string(e.what()));
    }
  }
  result.messages.push_back(csv_name + ": checked " + std::to_string(checked) + " runs");
}

}  // namespace

void ExperimentPlan::validate() const {
  if (source_shape.empty()) throw std::invalid_argument("plan needs a source shape");
  if (shapes.empty()) throw std::invalid_argument("plan needs at least one target shape");
  if (radii.empty()) throw std::invalid_argument("plan needs at least one shift radius");
  if (algos.empty()) throw std::invalid_argument("plan needs at least one algorithm");
  if (seeds.empty()) throw std::invalid_argument("plan needs at least one seed");
  for (int r : radii)
    if (r < 0) throw std::invalid_argument("shift radii must be non-negative");
  for (const auto& a : algos) algo_from_name(a);  // throws on unknown names
  if (n_demos <= 0) throw std::invalid_argument("plan needs a positive demo count");
  if (demo_horizon <= 0) throw std::invalid_argument("plan needs a positive demo horizon");
  if (demo_noise < 0.0 || demo_noise >= 1.0)
    throw std::invalid_argument("demo noise must lie in [0, 1)");
  if (slip < 0.0 || slip >= 1.0) throw std::invalid_argument("slip must lie in [0, 1)");
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) throw std::invalid_argument("gamma0 must lie in (0, 1)");
  learner.validate();
  {
    // The sampler and featurizer are filled from the source task at run time;
    // stand-ins let the remaining fit settings be range-checked here.
    ValueFitConfig vf = value_fit;
    vf.ood_sampler.free_states = {0};
    vf.featurizer = Featurizer{1, 1};
    vf.validate();
  }
  if (std::find(algos.begin(), algos.end(), "crsfd") != algos.end() && !(learner.gamma > gamma0))
    throw std::invalid_argument("crsfd runs need learner.gamma strictly above gamma0");
  if (threads < 0) throw std::invalid_argument("thread count must be non-negative");
  if (out_dir.empty() || shapes_dir.empty())
    throw std::invalid_argument("plan needs shapes_dir and out_dir");
}

json plan_to_json(const ExperimentPlan& plan) {
  json j = make_versioned("crsfd/plan");
  j["source_shape"] = plan.source_shape;
  j["shapes"] = plan.shapes;
  j["radii"] = plan.radii;
  j["algos"] = plan.algos;
  j["seeds"] = plan.seeds;
  j["n_demos"] = plan.n_demos;
  j["demo_horizon"] = plan.demo_horizon;
  j["demo_noise"] = plan.demo_noise;
  j["slip"] = plan.slip;
  j["demo_seed"] = plan.demo_seed;
  j["fit_seed"] = plan.fit_seed;
  j["gamma0"] = plan.gamma0;
  j["learner"] = learner_cfg_to_json(plan.learner);
  j["value_fit"] = value_fit_to_json(plan.value_fit);
  j["shapes_dir"] = plan.shapes_dir;
  j["out_dir"] = plan.out_dir;
  j["threads"] = plan.threads;
  j["resume"] = plan.resume;
  return j;
}

ExperimentPlan plan_from_json(const json& j) {
  check_schema(j, "crsfd/plan");
  ExperimentPlan plan;
  if (j.contains("source_shape")) plan.source_shape = j.at("source_shape").get<std::string>();
  if (j.contains("shapes")) plan.shapes = j.at("shapes").get<std::vector<std::string>>();
  if (j.contains("radii")) plan.radii = j.at("radii").get<std::vector<int>>();
  if (j.contains("algos")) plan.algos = j.at("algos").get<std::vector<std::string>>();
  if (j.contains("seeds")) plan.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("n_demos")) plan.n_demos = j.at("n_demos").get<int>();
  if (j.contains("demo_horizon")) plan.demo_horizon = j.at("demo_horizon").get<int>();
  if (j.contains("demo_noise")) plan.demo_noise = j.at("demo_noise").get<double>();
  if (j.contains("slip")) plan.slip = j.at("slip").get<double>();
  if (j.contains("demo_seed")) plan.demo_seed = j.at("demo_seed").get<std::uint64_t>();
  if (j.contains("fit_seed")) plan.fit_seed = j.at("fit_seed").get<std::uint64_t>();
  if (j.contains("gamma0")) plan.gamma0 = j.at("gamma0").get<double>();
  if (j.contains("learner")) learner_cfg_from_json(j.at("learner"), plan.learner);
  if (j.contains("value_fit")) value_fit_from_json(j.at("value_fit"), plan.value_fit);
  if (j.contains("shapes_dir")) plan.shapes_dir = j.at("shapes_dir").get<std::string>();
  if (j.contains("out_dir")) plan.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("threads")) plan.threads = j.at("threads").get<int>();
  if (j.contains("resume")) plan.resume = j.at("resume").get<bool>();
  plan.validate();
  return plan;
}

double curve_auc(const std::vector<EvalRow>& curves) {
  if (curves.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& row : curves) acc += row.success_rate;
  return acc / static_cast<double>(curves.size());
}

json write_run_artifacts(const std::string& dir, const RunResult& result, json meta) {
  std::filesystem::create_directories(dir);

  std::vector<std::vector<double>> rows;
  rows.reserve(result.curves.size());
  for (const auto& row : result.curves)
    rows.push_back(
        {static_cast<double>(row.step), row.success_rate, row.mean_return, row.td_loss});
  write_csv(dir + "/curves.csv", {"step", "success_rate", "mean_return", "td_loss"}, rows);

  if (result.agent) {
    json a = make_versioned("crsfd/agent");
    a["critic"] = agent_snapshot_json(*result.agent);
    write_json_file(dir + "/agent.json", a);
  }

  meta["schema"] = "crsfd/run-meta";
  meta["version"] = 1;
  meta["auc"] = curve_auc(result.curves);
  meta["final_success"] = result.curves.empty() ? 0.0 : result.curves.back().success_rate;
  meta["final_return"] = result.curves.empty() ? 0.0 : result.curves.back().mean_return;
  meta["env_steps"] = result.env_steps;
  meta["updates"] = result.updates;
  meta["episodes"] = result.episodes;
  meta["train_successes"] = result.train_successes;
  meta["resumed"] = result.resumed;
  meta["warnings"] = result.warnings;
  write_json_file(dir + "/run_meta.json", meta);
  return meta;
}

SweepResult run_sweep(const ExperimentPlan& plan) {
  plan.validate();
  std::filesystem::create_directories(plan.out_dir);
  write_json_file(plan.out_dir + "/plan.json", plan_to_json(plan));

  const bool need_potential =
      std::find(plan.algos.begin(), plan.algos.end(), "crsfd") != plan.algos.end();
  const SourceAssets assets = build_source_assets(plan, need_potential, plan.value_fit.backend);

  std::vector<Job> jobs;
  for (const auto& shape : plan.shapes)
    for (int radius : plan.radii)
      for (const auto& algo : plan.algos)
        for (std::uint64_t seed : plan.seeds) {
          Job job;
          job.shape = shape;
          job.radius = radius;
          job.algo = algo;
          job.seed = seed;
          job.dir = plan.out_dir + "/" + shape + "_r" + std::to_string(radius) + "/" + algo +
                    "/s" + std::to_string(seed);
          jobs.push_back(std::move(job));
        }

  SweepResult result;
  result.out_dir = plan.out_dir;
  result.runs = run_jobs(plan, assets, jobs);
  write_outcome_csv(plan.out_dir + "/aggregate.csv", result.runs);
  write_sweep_summary(plan, result.runs);
  return result;
}

SweepResult run_ablation(const ExperimentPlan& plan, const std::vector<std::string>& only) {
  plan.validate();
  if (!(plan.learner.gamma > plan.gamma0))
    throw std::invalid_argument("ablation needs learner.gamma strictly above gamma0");
  std::filesystem::create_directories(plan.out_dir);

  struct Variant {
    std::string name;
    bool conservative;
    bool enlarged;
    std::vector<std::string> toggles;
  };
  // gamma0 + 1e-6 keeps the strict discount ordering while removing the gap
  // in everything but name.
  const std::vector<Variant> all_variants = {
      {"full", true, true, {}},
      {"no_ood_regression", false, true, {"--no-ood-regression"}},
      {"no_large_gamma", true, false, {"--no-large-gamma"}},
      {"neither", false, false, {"--no-ood-regression", "--no-large-gamma"}},
  };
  std::vector<Variant> variants;
  for (const auto& v : all_variants)
    if (only.empty() || std::find(only.begin(), only.end(), v.name) != only.end())
      variants.push_back(v);
  if (variants.empty()) throw std::invalid_argument("ablation variant selection matched nothing");

  const double gamma_small = plan.gamma0 + 1e-6;
  const int radius = plan.radii.front();

  json meta = make_versioned("crsfd/ablation-meta");
  meta["radius"] = radius;
  meta["potential_backend"] = "mlp";
  json vlist = json::array();
  for (const auto& v : variants) {
    vlist.push_back(json{{"name", v.name},
                         {"toggles", v.toggles},
                         {"lambda", v.conservative ? plan.value_fit.lambda : 0.0},
                         {"gamma_k", v.enlarged ? plan.learner.gamma : gamma_small}});
  }
  meta["variants"] = std::move(vlist);
  write_json_file(plan.out_dir + "/ablation_meta.json", meta);

  // Ablating the conservative term only matters for a function approximator:
  // the tabular fit is already zero off the demo states at lambda = 0.
  SourceAssets assets = build_source_assets(plan, true, FitBackend::kMlp);
  PotentialFn loose_potential;
  std::string loose_digest;
  bool have_loose = false;
  if (assets.ok) {
    try {
      loose_potential =
          fit_potential_for(plan, assets.spec0, assets.demos, 0.0, FitBackend::kMlp);
      loose_digest = sha1_hex(potential_to_json(loose_potential).dump());
      have_loose = true;
    } catch (const std::exception& e) {
      assets.ok = false;
      assets.error = e.what();
    }
  }

  std::vector<Job> jobs;
  for (const auto& shape : plan.shapes)
    for (const auto& v : variants)
      for (std::uint64_t seed : plan.seeds) {
        Job job;
        job.shape = shape;
        job.radius = radius;
        job.algo = "crsfd/" + v.name;
        job.variant = v.name;
        job.toggles = v.toggles;
        job.seed = seed;
        job.gamma_override = v.enlarged ? plan.learner.gamma : gamma_small;
        if (!v.conservative && have_loose) {
          job.potential = &loose_potential;
          job.potential_digest = loose_digest;
        }
        job.dir = plan.out_dir + "/ablation/" + shape + "_r" + std::to_string(radius) + "/" +
                  v.name + "/s" + std::to_string(seed);
        jobs.push_back(std::move(job));
      }

  SweepResult result;
  result.out_dir = plan.out_dir;
  result.runs = run_jobs(plan, assets, jobs);
  write_outcome_csv(plan.out_dir + "/ablation.csv", result.runs);

  const auto cells = group_outcomes(result.runs);
  std::ostringstream md;
  md << "# Shaping ablation\n\nRadius " << radius << ", " << plan.seeds.size()
     << " seeds per cell, mlp potential backend.\n\n";
  md << "## Success AUC (mean ± std over seeds)\n\n| shape |";
  for (const auto& v : variants) md << ' ' << v.name << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < variants.size(); ++i) md << "---|";
  md << '\n';
  for (const auto& shape : plan.shapes) {
    md << "| " << shape << " |";
    for (const auto& v : variants)
      md << ' ' << cell_text(cells, shape, radius, "crsfd/" + v.name, true) << " |";
    md << '\n';
  }
  md << "\n## Full-method wins (AUC >= variant)\n\n";
  for (const auto& v : variants) {
    if (v.name == "full") continue;
    int wins = 0, comparable = 0;
    for (const auto& shape : plan.shapes) {
      bool a = false, b = false;
      const double full = cell_mean(cells, shape, radius, "crsfd/full", true, &a);
      const double other = cell_mean(cells, shape, radius, "crsfd/" + v.name, true, &b);
      if (a && b) {
        ++comparable;
        if (full >= other) ++wins;
      }
    }
    md << "- vs " << v.name << ": " << wins << "/" << comparable << " shapes\n";
  }
  bool any = false;
  md << "\n## Failures\n\n";
  for (const auto& oc : result.runs) {
    if (oc.ok) continue;
    any = true;
    md << "- " << oc.shape << " r" << oc.radius << ' ' << oc.algo << " seed " << oc.seed << ": "
       << oc.error << '\n';
  }
  if (!any) md << "none\n";
  write_text_file(plan.out_dir + "/ablation_summary.md", md.str());
  return result;
}

AuditResult audit_out_dir(const std::string& out_dir) {
  AuditResult result;
  if (!std::filesystem::exists(out_dir)) {
    result.ok = false;
    result.messages.push_back("output directory does not exist: " + out_dir);
    return result;
  }
  const bool has_any = std::filesystem::exists(out_dir + "/aggregate.csv") ||
                       std::filesystem::exists(out_dir + "/ablation.csv");
  if (!has_any) {
    result.ok = false;
    result.messages.push_back("nothing to audit: no aggregate.csv or ablation.csv in " + out_dir);
    return result;
  }
  audit_outcome_csv(out_dir, "aggregate.csv", result);
  audit_outcome_csv(out_dir, "ablation.csv", result);
  return result;
}

}  // namespace crsfd
