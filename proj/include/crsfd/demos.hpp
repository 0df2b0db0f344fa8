#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crsfd/env.hpp"
#include "crsfd/gridpeg.hpp"

namespace crsfd {

// Successful demonstrations on a source task, plus the discount their
// Monte-Carlo returns will be computed with.
struct DemoSet {
  std::vector<Trajectory> trajectories;
  std::string source_task;
  double gamma0 = 0.9;
  std::string collection_note;
};

// Collects n_traj successful episodes from an epsilon-noisy oracle: the
// greedy policy of the solved tabular task, replaced by a uniform random
// action with probability `noise`. Failed episodes are resampled; if fewer
// than 1 in 100 attempts succeed the noise level is considered unusable and
// a std::runtime_error is thrown. Deterministic for a fixed seed.
DemoSet collect_demos(const GridPegSpec& spec, int n_traj, int horizon, double noise,
                      double gamma0, std::uint64_t seed);

}  // namespace crsfd
