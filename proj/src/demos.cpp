#include "crsfd/demos.hpp"

#include <sstream>
#include <stdexcept>

#include "crsfd/rng.hpp"

namespace crsfd {

DemoSet collect_demos(const GridPegSpec& spec, int n_traj, int horizon, double noise,
                      double gamma0, std::uint64_t seed) {
  if (n_traj < 1) throw std::invalid_argument("collect_demos: n_traj must be >= 1");
  if (horizon < 1) throw std::invalid_argument("collect_demos: horizon must be >= 1");
  if (!(noise >= 0.0 && noise < 1.0))
    throw std::invalid_argument("collect_demos: noise must lie in [0, 1)");
  if (!(gamma0 > 0.0 && gamma0 < 1.0))
    throw std::invalid_argument("collect_demos: gamma0 must lie in (0, 1)");

  GridPegEnv env(spec, 0);
  const TabularMDP tab = to_tabular(spec, gamma0);
  const ValueIterationResult vi = value_iteration(tab);

  // Lowest-index greedy action per state keeps the oracle deterministic.
  std::vector<int> oracle(spec.n_states(), 0);
  for (int s = 0; s < spec.n_states(); ++s) oracle[s] = vi.greedy_sets[s].front();

  const ActionSampler sampler = [&](int s, std::mt19937_64& rng) {
    if (noise > 0.0 && rand_double(rng) < noise) return rand_int(rng, kGridActions);
    return oracle[s];
  };

  DemoSet demos;
  demos.source_task = spec.task_id();
  demos.gamma0 = gamma0;
  {
    std::ostringstream note;
    note << "epsilon-noisy oracle, eps=" << noise << ", seed=" << seed;
    demos.collection_note = note.str();
  }

  auto rng = make_rng(seed);
  const long max_attempts = 100L * n_traj;
  long attempts = 0;
  while (static_cast<int>(demos.trajectories.size()) < n_traj) {
    if (attempts >= max_attempts)
      throw std::runtime_error(
          "collect_demos: oracle success rate below 1%; noise level unusable");
    ++attempts;
    Trajectory traj = rollout(env, sampler, horizon, rng);
    traj.success = traj.total_reward() >= spec.success_reward;
    if (traj.success) demos.trajectories.push_back(std::move(traj));
  }
  return demos;
}

}  // namespace crsfd
