#include "crsfd/valuefit.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "crsfd/rng.hpp"

namespace crsfd {

std::vector<McTarget> mc_returns(const DemoSet& demos, double gamma0,
                                 std::vector<std::string>* warnings) {
  if (!(gamma0 >= 0.0 && gamma0 < 1.0))
    throw std::invalid_argument("mc_returns: gamma0 must lie in [0, 1)");
  std::vector<McTarget> targets;
  for (std::size_t k = 0; k < demos.trajectories.size(); ++k) {
    const auto& traj = demos.trajectories[k];
    if (traj.transitions.empty()) {
      if (warnings) warnings->push_back("trajectory " + std::to_string(k) + " is empty; skipped");
      continue;
    }
    const std::size_t first = targets.size();
    targets.resize(first + traj.transitions.size());
    double g = 0.0;  // return beyond the last step; no bootstrap on truncation
    for (int t = static_cast<int>(traj.transitions.size()) - 1; t >= 0; --t) {
      const auto& tr = traj.transitions[t];
      g = tr.reward + gamma0 * g;
      targets[first + t] = {tr.state, g};
    }
  }
  return targets;
}

OodSampler OodSampler::from_spec(const GridPegSpec& spec) {
  return OodSampler{spec.free_cells()};
}

std::vector<int> ood_sample(const OodSampler& sampler, int n,
                            const std::vector<int>& demo_states, std::uint64_t seed) {
  (void)demo_states;  // no exclusion by design; see header
  if (n < 0) throw std::invalid_argument("ood_sample: n must be >= 0");
  if (sampler.free_states.empty())
    throw std::invalid_argument("ood_sample: empty free space");
  auto rng = make_rng(seed, 0x00d5);
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = sampler.free_states[rand_int(rng, static_cast<int>(sampler.free_states.size()))];
  return out;
}

void ValueFitConfig::validate() const {
  if (!(gamma0 >= 0.0 && gamma0 < 1.0))
    throw std::invalid_argument("ValueFitConfig: gamma0 must lie in [0, 1)");
  if (lambda < 0.0) throw std::invalid_argument("ValueFitConfig: lambda must be >= 0");
  if (ood_sampler.free_states.empty())
    throw std::invalid_argument("ValueFitConfig: empty free space");
  if (backend == FitBackend::kMlp) {
    if (n_regress_steps < 1)
      throw std::invalid_argument("ValueFitConfig: n_regress_steps must be >= 1");
    if (batch_demo < 1 || batch_ood < 1)
      throw std::invalid_argument("ValueFitConfig: batch sizes must be >= 1");
    if (learning_rate <= 0.0)
      throw std::invalid_argument("ValueFitConfig: learning_rate must be positive");
    if (featurizer.width < 1 || featurizer.height < 1)
      throw std::invalid_argument("ValueFitConfig: featurizer not configured");
  }
}

namespace {

FitResult fit_tabular(const DemoSet& demos, const ValueFitConfig& cfg,
                      const std::vector<McTarget>& targets) {
  // Per-state closed-form minimizer of
  //   E_demo[(V_s - G)^2] + lambda * E_ood[V_s^2]
  // with the empirical target distribution and the uniform free-state
  // distribution: V_s = p_d(s) * mean_G(s) / (p_d(s) + lambda / |free|).
  int n_states = 0;
  for (int s : cfg.ood_sampler.free_states) n_states = std::max(n_states, s + 1);
  for (const auto& t : targets) n_states = std::max(n_states, t.state + 1);

  std::vector<double> sum(n_states, 0.0);
  std::vector<long> cnt(n_states, 0);
  for (const auto& t : targets) {
    sum[t.state] += t.g;
    ++cnt[t.state];
  }
  std::vector<char> free_mask(n_states, 0);
  for (int s : cfg.ood_sampler.free_states) free_mask[s] = 1;

  const double total = static_cast<double>(targets.size());
  const double p_ood = 1.0 / static_cast<double>(cfg.ood_sampler.free_states.size());
  std::vector<double> values(n_states, 0.0);
  double demo_loss = 0.0, ood_loss = 0.0;
  for (int s = 0; s < n_states; ++s) {
    if (cnt[s] == 0) continue;  // no demo evidence: conservative zero
    const double mean = sum[s] / static_cast<double>(cnt[s]);
    if (cfg.lambda == 0.0) {
      values[s] = mean;
      continue;
    }
    const double p_d = static_cast<double>(cnt[s]) / total;
    const double ridge = free_mask[s] ? cfg.lambda * p_ood : 0.0;
    values[s] = p_d * mean / (p_d + ridge);
  }
  for (const auto& t : targets) {
    const double e = values[t.state] - t.g;
    demo_loss += e * e;
  }
  demo_loss /= total;
  for (int s : cfg.ood_sampler.free_states) ood_loss += values[s] * values[s];
  ood_loss /= static_cast<double>(cfg.ood_sampler.free_states.size());

  FitResult out;
  out.potential = PotentialFn::tabular(std::move(values));
  out.trace.push_back({0, demo_loss, ood_loss});
  (void)demos;
  return out;
}

FitResult fit_mlp(const DemoSet& demos, const ValueFitConfig& cfg,
                  const std::vector<McTarget>& targets, std::uint64_t seed) {
  (void)demos;
  MlpNet net = MlpNet::make(cfg.featurizer.dim(), cfg.mlp_hidden, 1, mix64(seed ^ 0xf17));
  MlpNet grad = MlpNet::zeros_like(net);
  auto rng = make_rng(seed, 0xf17);
  const auto& free_states = cfg.ood_sampler.free_states;

  FitResult out;
  out.trace.reserve(cfg.n_regress_steps);
  MlpNet::Tape tape;
  for (int step = 0; step < cfg.n_regress_steps; ++step) {
    grad.zero();
    double demo_loss = 0.0, ood_loss = 0.0;
    for (int i = 0; i < cfg.batch_demo; ++i) {
      const auto& t = targets[rand_int(rng, static_cast<int>(targets.size()))];
      const double v = net.forward(cfg.featurizer.features(t.state), tape)[0];
      const double e = v - t.g;
      demo_loss += e * e;
      net.backward(tape, {2.0 * e / cfg.batch_demo}, grad);
    }
    if (cfg.lambda > 0.0) {
      for (int i = 0; i < cfg.batch_ood; ++i) {
        const int s = free_states[rand_int(rng, static_cast<int>(free_states.size()))];
        const double v = net.forward(cfg.featurizer.features(s), tape)[0];
        ood_loss += v * v;
        net.backward(tape, {cfg.lambda * 2.0 * v / cfg.batch_ood}, grad);
      }
    }
    demo_loss /= cfg.batch_demo;
    ood_loss /= cfg.batch_ood;
    if (!std::isfinite(demo_loss) || !std::isfinite(ood_loss)) {
      std::ostringstream os;
      os << "fit_conservative: diverged at step " << step << " (demo_loss=" << demo_loss
         << ", ood_loss=" << ood_loss << "); reduce learning_rate";
      throw std::runtime_error(os.str());
    }
    net.axpy(-cfg.learning_rate, grad);
    out.trace.push_back({step, demo_loss, ood_loss});
  }
  out.potential = PotentialFn::mlp(std::move(net), cfg.featurizer);
  return out;
}

}  // namespace

FitResult fit_conservative(const DemoSet& demos, const ValueFitConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<std::string> warnings;
  const std::vector<McTarget> targets = mc_returns(demos, cfg.gamma0, &warnings);
  if (targets.empty()) throw std::invalid_argument("fit_conservative: no demo targets");

  FitResult out = cfg.backend == FitBackend::kTabular ? fit_tabular(demos, cfg, targets)
                                                      : fit_mlp(demos, cfg, targets, seed);
  out.warnings = std::move(warnings);
  return out;
}

}  // namespace crsfd
