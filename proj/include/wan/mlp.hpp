#pragma once

#include "wan/activation.hpp"
#include "wan/common.hpp"

#include <numeric>
#include <vector>

namespace wan {

/// Fully-connected architecture: input -> hidden layers (each with its own
/// activation) -> scalar output with no activation.
struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_widths;
  std::vector<Activation> activations;  // one per hidden layer

  int output_dim() const { return 1; }
  int num_hidden() const { return static_cast<int>(hidden_widths.size()); }

  void validate() const {
    if (input_dim < 1) throw ConfigError("MlpSpec: input_dim must be >= 1");
    if (activations.size() != hidden_widths.size())
      throw ConfigError("MlpSpec: activation schedule length (" +
                        std::to_string(activations.size()) + ") must equal hidden layer count (" +
                        std::to_string(hidden_widths.size()) + ")");
    for (int w : hidden_widths)
      if (w < 1) throw ConfigError("MlpSpec: hidden widths must be positive");
  }

  int layer_in(int l) const { return l == 0 ? input_dim : hidden_widths[static_cast<size_t>(l - 1)]; }
  int layer_out(int l) const {
    return l == num_hidden() ? 1 : hidden_widths[static_cast<size_t>(l)];
  }

  /// Total trainable parameter count (weights + biases, all layers).
  int param_count() const {
    int n = 0;
    for (int l = 0; l <= num_hidden(); ++l) n += layer_out(l) * layer_in(l) + layer_out(l);
    return n;
  }

  bool operator==(const MlpSpec& o) const {
    return input_dim == o.input_dim && hidden_widths == o.hidden_widths &&
           activations == o.activations;
  }
};

// Canonical flat layout: layers in forward order (hidden 1..L, then output);
// within a layer the weight matrix row-major (w[out][in]) followed by the
// biases. All entries are 64-bit reals.
struct ParamVector {
  Vector data;

  int size() const { return static_cast<int>(data.size()); }
  bool all_finite() const { return data.allFinite(); }
};

/// Row-major view of layer l's weights inside a flat parameter vector.
using WeightMap = Eigen::Map<const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using WeightMapMut = Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline int layer_offset(const MlpSpec& spec, int layer) {
  int off = 0;
  for (int l = 0; l < layer; ++l) off += spec.layer_out(l) * spec.layer_in(l) + spec.layer_out(l);
  return off;
}

inline WeightMap weights_of(const MlpSpec& spec, const ParamVector& p, int layer) {
  return WeightMap(p.data.data() + layer_offset(spec, layer), spec.layer_out(layer),
                   spec.layer_in(layer));
}

inline Eigen::Map<const Vector> biases_of(const MlpSpec& spec, const ParamVector& p, int layer) {
  int off = layer_offset(spec, layer) + spec.layer_out(layer) * spec.layer_in(layer);
  return Eigen::Map<const Vector>(p.data.data() + off, spec.layer_out(layer));
}

inline WeightMapMut weights_of(const MlpSpec& spec, ParamVector& p, int layer) {
  return WeightMapMut(p.data.data() + layer_offset(spec, layer), spec.layer_out(layer),
                      spec.layer_in(layer));
}

inline Eigen::Map<Vector> biases_of(const MlpSpec& spec, ParamVector& p, int layer) {
  int off = layer_offset(spec, layer) + spec.layer_out(layer) * spec.layer_in(layer);
  return Eigen::Map<Vector>(p.data.data() + off, spec.layer_out(layer));
}

/// Glorot-style uniform initialization: weights ~ U(-r, r) with
/// r = sqrt(6 / (fan_in + fan_out)), biases zero. Fully determined by seed.
inline ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector p;
  p.data.setZero(spec.param_count());
  Rng rng(seed, RngStream::ParamInit);
  for (int l = 0; l <= spec.num_hidden(); ++l) {
    int in = spec.layer_in(l), out = spec.layer_out(l);
    Real r = std::sqrt(6.0 / static_cast<Real>(in + out));
    auto W = weights_of(spec, p, l);
    for (int i = 0; i < out; ++i)
      for (int k = 0; k < in; ++k) W(i, k) = rng.uniform(-r, r);
    // biases stay zero
  }
  return p;
}

/// Solution-network default: 6 hidden layers of 40 neurons, tanh on layers
/// 1,2,4,6 and softplus (or elu for problems with non-smooth solutions) on
/// layers 3 and 5.
inline MlpSpec default_u_spec(int input_dim, bool use_elu = false) {
  MlpSpec s;
  s.input_dim = input_dim;
  s.hidden_widths.assign(6, 40);
  Activation mid = use_elu ? Activation::Elu : Activation::Softplus;
  s.activations = {Activation::Tanh, Activation::Tanh, mid,
                   Activation::Tanh, mid,              Activation::Tanh};
  return s;
}

/// Test-network default: 8 hidden layers of 50 neurons with a mixed
/// tanh/sinc/softplus schedule.
inline MlpSpec default_phi_spec(int input_dim) {
  MlpSpec s;
  s.input_dim = input_dim;
  s.hidden_widths.assign(8, 50);
  s.activations = {Activation::Tanh,     Activation::Sinc, Activation::Softplus,
                   Activation::Tanh,     Activation::Sinc, Activation::Softplus,
                   Activation::Sinc,     Activation::Softplus};
  return s;
}

/// Scales the output layer (weights and bias) of a parameter vector by k.
/// For a linear problem this scales the network output by exactly k.
inline ParamVector scale_output_layer(const MlpSpec& spec, const ParamVector& p, Real k) {
  ParamVector q = p;
  int l = spec.num_hidden();
  int off = layer_offset(spec, l);
  int n = spec.layer_out(l) * spec.layer_in(l) + spec.layer_out(l);
  q.data.segment(off, n) *= k;
  return q;
}

}  // namespace wan
