#pragma once

#include <string>
#include <vector>

#include "crsfd/mlp.hpp"

namespace crsfd {

// Maps a discrete state id to normalized features in [-1, 1]. Only grid
// coordinates are needed so far.
struct Featurizer {
  int width = 0;
  int height = 0;

  int dim() const { return 2; }
  std::vector<double> features(int state) const {
    const int x = state % width, y = state / width;
    const double fx = width == 1 ? 0.0 : 2.0 * x / (width - 1) - 1.0;
    const double fy = height == 1 ? 0.0 : 2.0 * y / (height - 1) - 1.0;
    return {fx, fy};
  }
};

// State potential used for reward shaping. Tabular backend: one value per
// state. Mlp backend: net over Featurizer features.
class PotentialFn {
 public:
  enum class Backend { kTabular, kMlp };

  static PotentialFn tabular(std::vector<double> values);
  static PotentialFn zero(int n_states) { return tabular(std::vector<double>(n_states, 0.0)); }
  static PotentialFn mlp(MlpNet net, Featurizer featurizer);

  Backend backend() const { return backend_; }
  double value(int state) const;
  // Dense view over [0, n_states); used by the tabular verifiers.
  std::vector<double> dense(int n_states) const;

  const std::vector<double>& table() const { return table_; }
  const MlpNet& net() const { return net_; }
  const Featurizer& featurizer() const { return featurizer_; }

 private:
  Backend backend_ = Backend::kTabular;
  std::vector<double> table_;
  MlpNet net_;
  Featurizer featurizer_;
};

}  // namespace crsfd
