#include "crsfd/potential.hpp"

#include <stdexcept>

namespace crsfd {

PotentialFn PotentialFn::tabular(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("PotentialFn: empty value table");
  PotentialFn fn;
  fn.backend_ = Backend::kTabular;
  fn.table_ = std::move(values);
  return fn;
}

PotentialFn PotentialFn::mlp(MlpNet net, Featurizer featurizer) {
  if (net.output_dim != 1) throw std::invalid_argument("PotentialFn: net must have one output");
  if (net.input_dim != featurizer.dim())
    throw std::invalid_argument("PotentialFn: net input does not match featurizer");
  PotentialFn fn;
  fn.backend_ = Backend::kMlp;
  fn.net_ = std::move(net);
  fn.featurizer_ = featurizer;
  return fn;
}

double PotentialFn::value(int state) const {
  if (backend_ == Backend::kTabular) {
    if (state < 0 || state >= static_cast<int>(table_.size()))
      throw std::out_of_range("PotentialFn: state outside value table");
    return table_[state];
  }
  return net_.forward(featurizer_.features(state))[0];
}

std::vector<double> PotentialFn::dense(int n_states) const {
  std::vector<double> out(n_states, 0.0);
  for (int s = 0; s < n_states; ++s) out[s] = value(s);
  return out;
}

}  // namespace crsfd
