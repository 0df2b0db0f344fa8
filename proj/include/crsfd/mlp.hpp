#pragma once

#include <cstdint>
#include <vector>

namespace crsfd {

// Small dense net: tanh hidden layers, linear outputs. Forward and backward
// passes are written out by hand so gradients can be audited against finite
// differences.
struct MlpNet {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden;               // hidden layer widths
  std::vector<std::vector<double>> w;    // w[l][out*in_l + in], row-major
  std::vector<std::vector<double>> b;    // b[l][out]

  // Xavier-uniform weights, zero biases, deterministic in seed.
  static MlpNet make(int input_dim, const std::vector<int>& hidden, int output_dim,
                     std::uint64_t seed);
  // All-parameters-zero net of the same shape (gradient accumulators).
  static MlpNet zeros_like(const MlpNet& other);

  int n_layers() const { return static_cast<int>(w.size()); }
  int layer_in(int l) const;
  int layer_out(int l) const;
  int param_count() const;

  // Flat parameter view, layer by layer, weights then biases.
  double get_param(int flat_index) const;
  void set_param(int flat_index, double value);

  // Cached activations from a forward pass; acts[0] is the input, acts[l+1]
  // the post-activation output of layer l.
  struct Tape {
    std::vector<std::vector<double>> acts;
  };

  std::vector<double> forward(const std::vector<double>& x) const;
  std::vector<double> forward(const std::vector<double>& x, Tape& tape) const;

  // Accumulates dLoss/dParam into grad given dLoss/dOutput.
  void backward(const Tape& tape, const std::vector<double>& output_grad, MlpNet& grad) const;

  // theta += scale * other (used for SGD steps and Polyak averaging).
  void axpy(double scale, const MlpNet& other);
  // theta = (1 - tau) * theta + tau * other.
  void polyak_from(const MlpNet& other, double tau);
  void zero();
};

}  // namespace crsfd
