#include "crsfd/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "crsfd/rng.hpp"

namespace crsfd {

MlpNet MlpNet::make(int input_dim, const std::vector<int>& hidden, int output_dim,
                    std::uint64_t seed) {
  if (input_dim < 1 || output_dim < 1)
    throw std::invalid_argument("MlpNet: input_dim and output_dim must be >= 1");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("MlpNet: hidden widths must be >= 1");

  MlpNet net;
  net.input_dim = input_dim;
  net.output_dim = output_dim;
  net.hidden = hidden;
  auto rng = make_rng(seed, 0x11a9);

  std::vector<int> sizes;
  sizes.push_back(input_dim);
  for (int h : hidden) sizes.push_back(h);
  sizes.push_back(output_dim);

  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const double a = std::sqrt(6.0 / (in + out));
    std::vector<double> wl(static_cast<std::size_t>(out) * in);
    for (double& v : wl) v = (2.0 * rand_double(rng) - 1.0) * a;
    net.w.push_back(std::move(wl));
    net.b.emplace_back(out, 0.0);
  }
  return net;
}

MlpNet MlpNet::zeros_like(const MlpNet& other) {
  MlpNet net = other;
  net.zero();
  return net;
}

int MlpNet::layer_in(int l) const {
  return static_cast<int>(w[l].size() / b[l].size());
}

int MlpNet::layer_out(int l) const { return static_cast<int>(b[l].size()); }

int MlpNet::param_count() const {
  int n = 0;
  for (int l = 0; l < n_layers(); ++l)
    n += static_cast<int>(w[l].size() + b[l].size());
  return n;
}

double MlpNet::get_param(int flat_index) const {
  int i = flat_index;
  for (int l = 0; l < n_layers(); ++l) {
    if (i < static_cast<int>(w[l].size())) return w[l][i];
    i -= static_cast<int>(w[l].size());
    if (i < static_cast<int>(b[l].size())) return b[l][i];
    i -= static_cast<int>(b[l].size());
  }
  throw std::out_of_range("MlpNet::get_param");
}

void MlpNet::set_param(int flat_index, double value) {
  int i = flat_index;
  for (int l = 0; l < n_layers(); ++l) {
    if (i < static_cast<int>(w[l].size())) {
      w[l][i] = value;
      return;
    }
    i -= static_cast<int>(w[l].size());
    if (i < static_cast<int>(b[l].size())) {
      b[l][i] = value;
      return;
    }
    i -= static_cast<int>(b[l].size());
  }
  throw std::out_of_range("MlpNet::set_param");
}

std::vector<double> MlpNet::forward(const std::vector<double>& x) const {
  Tape tape;
  return forward(x, tape);
}

std::vector<double> MlpNet::forward(const std::vector<double>& x, Tape& tape) const {
  if (static_cast<int>(x.size()) != input_dim)
    throw std::invalid_argument("MlpNet::forward: input size mismatch");
  tape.acts.assign(1, x);
  const int L = n_layers();
  for (int l = 0; l < L; ++l) {
    const auto& in = tape.acts.back();
    const int n_in = layer_in(l), n_out = layer_out(l);
    std::vector<double> out(n_out);
    for (int o = 0; o < n_out; ++o) {
      double acc = b[l][o];
      const double* row = &w[l][static_cast<std::size_t>(o) * n_in];
      for (int i = 0; i < n_in; ++i) acc += row[i] * in[i];
      out[o] = (l + 1 < L) ? std::tanh(acc) : acc;  // linear final layer
    }
    tape.acts.push_back(std::move(out));
  }
  return tape.acts.back();
}

void MlpNet::backward(const Tape& tape, const std::vector<double>& output_grad,
                      MlpNet& grad) const {
  const int L = n_layers();
  if (tape.acts.size() != static_cast<std::size_t>(L) + 1)
    throw std::invalid_argument("MlpNet::backward: tape does not match net");
  if (static_cast<int>(output_grad.size()) != output_dim)
    throw std::invalid_argument("MlpNet::backward: output_grad size mismatch");

  std::vector<double> delta = output_grad;  // dLoss/d(pre-activation) of layer l
  for (int l = L - 1; l >= 0; --l) {
    const auto& in = tape.acts[l];
    const int n_in = layer_in(l), n_out = layer_out(l);
    // tanh'(z) = 1 - tanh(z)^2; the tape stores tanh(z) for hidden layers.
    if (l < L - 1)
      for (int o = 0; o < n_out; ++o) delta[o] *= 1.0 - tape.acts[l + 1][o] * tape.acts[l + 1][o];

    std::vector<double> prev_delta(n_in, 0.0);
    for (int o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* grow = &grad.w[l][static_cast<std::size_t>(o) * n_in];
      const double* row = &w[l][static_cast<std::size_t>(o) * n_in];
      for (int i = 0; i < n_in; ++i) {
        grow[i] += d * in[i];
        prev_delta[i] += d * row[i];
      }
      grad.b[l][o] += d;
    }
    delta.swap(prev_delta);
  }
}

void MlpNet::axpy(double scale, const MlpNet& other) {
  for (int l = 0; l < n_layers(); ++l) {
    for (std::size_t i = 0; i < w[l].size(); ++i) w[l][i] += scale * other.w[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += scale * other.b[l][i];
  }
}

void MlpNet::polyak_from(const MlpNet& other, double tau) {
  for (int l = 0; l < n_layers(); ++l) {
    for (std::size_t i = 0; i < w[l].size(); ++i)
      w[l][i] = (1.0 - tau) * w[l][i] + tau * other.w[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i)
      b[l][i] = (1.0 - tau) * b[l][i] + tau * other.b[l][i];
  }
}

void MlpNet::zero() {
  for (auto& wl : w) wl.assign(wl.size(), 0.0);
  for (auto& bl : b) bl.assign(bl.size(), 0.0);
}

}  // namespace crsfd
