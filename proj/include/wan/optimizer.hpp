#pragma once

#include "wan/mlp.hpp"

namespace wan {

enum class OptimizerKind { AdaGrad, Adam };

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::AdaGrad ? "adagrad" : "adam";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adagrad") return OptimizerKind::AdaGrad;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct AdamParams {
  Real beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// Per-coordinate first-order optimizer. `sign` selects descent (-1) or
/// ascent (+1).
struct Optimizer {
  OptimizerKind kind = OptimizerKind::AdaGrad;
  Real tau = 0.0;
  AdamParams adam;
  Vector accum;  // AdaGrad squared-gradient state
  Vector m, v;   // Adam moments
  std::int64_t t = 0;

  static Optimizer adagrad(Real tau, int n) {
    Optimizer o;
    o.kind = OptimizerKind::AdaGrad;
    o.tau = tau;
    o.accum = Vector::Zero(n);
    return o;
  }

  static Optimizer adam_opt(Real tau, int n, AdamParams p = {}) {
    Optimizer o;
    o.kind = OptimizerKind::Adam;
    o.tau = tau;
    o.adam = p;
    o.m = Vector::Zero(n);
    o.v = Vector::Zero(n);
    return o;
  }

  static Optimizer make(OptimizerKind kind, Real tau, int n, AdamParams p = {}) {
    return kind == OptimizerKind::AdaGrad ? adagrad(tau, n) : adam_opt(tau, n, p);
  }

  void apply(ParamVector& params, const Vector& grad, Real sign) {
    if (grad.size() != params.size())
      throw DimensionError("optimizer: gradient/parameter size mismatch");
    if (!grad.allFinite()) throw NonFiniteError("optimizer: non-finite gradient");
    if (kind == OptimizerKind::AdaGrad) {
      accum.array() += grad.array().square();
      params.data.array() += sign * tau * grad.array() / (accum.array().sqrt() + 1e-10);
    } else {
      ++t;
      m = adam.beta1 * m + (1.0 - adam.beta1) * grad;
      v.array() = adam.beta2 * v.array() + (1.0 - adam.beta2) * grad.array().square();
      Real mc = 1.0 - std::pow(adam.beta1, static_cast<Real>(t));
      Real vc = 1.0 - std::pow(adam.beta2, static_cast<Real>(t));
      params.data.array() +=
          sign * tau * (m.array() / mc) / ((v.array() / vc).sqrt() + adam.eps);
    }
  }
};

/// Spec-level wrappers: one optimizer step in descent convention.
inline void adagrad_step(ParamVector& params, const Vector& grad, Optimizer& state) {
  if (state.kind != OptimizerKind::AdaGrad) throw ConfigError("adagrad_step on non-AdaGrad state");
  state.apply(params, grad, -1.0);
}

inline void adam_step(ParamVector& params, const Vector& grad, Optimizer& state) {
  if (state.kind != OptimizerKind::Adam) throw ConfigError("adam_step on non-Adam state");
  state.apply(params, grad, -1.0);
}

}  // namespace wan
