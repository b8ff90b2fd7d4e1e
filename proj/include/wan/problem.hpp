#pragma once

// PDE problem definitions (coefficients, data, nonlinearity, boundary kind,
// exact solutions) and the pointwise weak integrands for the static, the
// Crank-Nicolson semi-discrete, and the joint space-time formulations.
//
// Static template:    -div(a grad u) + b . grad u + c u + N(u, grad u) = f
// Parabolic template:  u_t + [same spatial operator] = f
// Coefficient fields take (x, t); static problems ignore t.

#include "wan/domain.hpp"
#include "wan/net_kernels.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <memory>
#include <string>
#include <utility>

namespace wan {

using ScalarField = std::function<Real(const Vector& x, Real t)>;
using VectorField = std::function<Vector(const Vector& x, Real t)>;
using MatrixField = std::function<Matrix(const Vector& x, Real t)>;
/// Boundary data; receives the outward unit normal (Neumann data needs it).
using BoundaryField = std::function<Real(const Vector& x, const Vector& n, Real t)>;

enum class BoundaryKind { Dirichlet, Neumann };

/// Diffusion coefficient: scalar-times-identity shorthand, or a full
/// symmetric matrix field.
struct Diffusion {
  ScalarField scalar;     // a(x,t) * I
  VectorField scalar_grad;  // optional: spatial gradient of the scalar
  MatrixField matrix;     // full d x d (overrides scalar when set)

  bool isotropic() const { return !matrix; }
  explicit operator bool() const { return static_cast<bool>(scalar) || static_cast<bool>(matrix); }
};

/// Nonlinear term N(u, grad u) with caller-supplied partial derivatives.
struct Nonlinearity {
  std::function<Real(Real u, const Vector& grad)> value;
  std::function<Real(Real u, const Vector& grad)> du;
  std::function<Vector(Real u, const Vector& grad)> dgrad;
  explicit operator bool() const { return static_cast<bool>(value); }
};

struct PdeProblem {
  std::string name;
  Domain domain;
  Diffusion a;
  VectorField b;           // null -> zero drift
  ScalarField c;           // null -> zero reaction
  Nonlinearity nonlinear;  // optional
  ScalarField f;           // source
  BoundaryField g;         // boundary data
  BoundaryKind bc = BoundaryKind::Dirichlet;
  ScalarField h;           // initial data (parabolic only)
  VectorField h_grad;      // optional analytic spatial gradient of h

  // exact solution and its analytic derivatives, when known
  ScalarField exact;
  VectorField exact_grad;      // spatial gradient
  ScalarField exact_laplacian; // sum of second spatial derivatives
  ScalarField exact_dt;        // time derivative (parabolic)

  bool parabolic() const { return domain.time_extended(); }
  int dim() const { return domain.dim(); }
  bool has_exact() const { return static_cast<bool>(exact); }
};

// ---------------------------------------------------------------------------
// Pointwise weak integrand
// ---------------------------------------------------------------------------

/// Lightweight (value, spatial gradient) pair at a point.
struct PointEval {
  Real value = 0;
  Vector grad;
};

inline PointEval to_point_eval(const EvalRecord& er, int spatial_dim) {
  return PointEval{er.value, er.input_grad.head(spatial_dim)};
}

/// I(x) = sum_ij a_ij du_j dphi_i + sum_i b_i phi du_i + c u phi - f phi
///        + N(u, grad u) phi.
/// Divergence-form terms integrate by parts onto grad phi; everything else
/// multiplies phi directly. For space-time problems this is the spatial part;
/// the time-derivative and terminal terms are handled separately.
inline Real weak_integrand(const PdeProblem& p, const Vector& x, Real t, const PointEval& u,
                           const PointEval& phi) {
  if (!std::isfinite(u.value) || !std::isfinite(phi.value))
    throw NonFiniteError("weak_integrand: non-finite network value");
  Real I = 0;
  if (p.a) {
    if (p.a.isotropic()) {
      I += p.a.scalar(x, t) * u.grad.dot(phi.grad);
    } else {
      Matrix A = p.a.matrix(x, t);
      I += phi.grad.dot(A * u.grad);
    }
  }
  if (p.b) I += phi.value * p.b(x, t).dot(u.grad);
  if (p.c) I += p.c(x, t) * u.value * phi.value;
  if (p.nonlinear) I += p.nonlinear.value(u.value, u.grad) * phi.value;
  if (p.f) I -= p.f(x, t) * phi.value;
  if (!std::isfinite(I)) throw NonFiniteError("weak_integrand: non-finite integrand");
  return I;
}

// ---------------------------------------------------------------------------
// Frozen scalar fields (previous time-step solutions, exact references)
// ---------------------------------------------------------------------------

/// A frozen scalar field with first derivatives; `div_a_grad`, when provided,
/// returns div(a(.,t) grad field) directly, otherwise it is approximated by
/// central differences of the analytic first-derivative field.
struct FrozenField {
  std::function<Real(const Vector&)> value;
  std::function<Vector(const Vector&)> grad;
  std::function<Real(const Vector&, Real t)> div_a_grad;  // optional
};

inline FrozenField make_network_field(std::shared_ptr<const MlpSpec> spec,
                                      std::shared_ptr<const ParamVector> params) {
  FrozenField fld;
  fld.value = [spec, params](const Vector& x) {
    Vector u;
    net_forward_chunk(*spec, *params, x.transpose(), false, false, nullptr, u, nullptr);
    return u(0);
  };
  fld.grad = [spec, params](const Vector& x) {
    Vector u;
    Matrix G;
    net_forward_chunk(*spec, *params, x.transpose(), true, false, nullptr, u, &G);
    return Vector(G.row(0).transpose());
  };
  return fld;
}

inline FrozenField make_analytic_field(std::function<Real(const Vector&)> value,
                                       std::function<Vector(const Vector&)> grad) {
  FrozenField fld;
  fld.value = std::move(value);
  fld.grad = std::move(grad);
  return fld;
}

/// Step used by the finite-difference fallback for div(a grad u_prev).
inline constexpr Real kDivGradFdStep = 1e-4;

/// div(a(., t) grad field)(x): the field's own routine when present, else
/// central differences of the analytic first-derivative flux.
inline Real divergence_a_grad(const PdeProblem& p, const FrozenField& fld, const Vector& x,
                              Real t) {
  if (fld.div_a_grad) return fld.div_a_grad(x, t);
  const int d = static_cast<int>(x.size());
  auto flux_i = [&](const Vector& y, int i) -> Real {
    Vector gy = fld.grad(y);
    if (!p.a) return 0.0;
    if (p.a.isotropic()) return p.a.scalar(y, t) * gy(i);
    return p.a.matrix(y, t).row(i).dot(gy);
  };
  Real div = 0;
  Vector y = x;
  for (int i = 0; i < d; ++i) {
    y(i) = x(i) + kDivGradFdStep;
    Real fp = flux_i(y, i);
    y(i) = x(i) - kDivGradFdStep;
    Real fm = flux_i(y, i);
    y(i) = x(i);
    div += (fp - fm) / (2.0 * kDivGradFdStep);
  }
  return div;
}

// ---------------------------------------------------------------------------
// Crank-Nicolson semi-discretization
// ---------------------------------------------------------------------------

/// The generator L(x,t;u) = div(a grad u) - b . grad u - c u - N(u, grad u)
/// applied to a frozen field, so that u_t = L u + f.
inline Real apply_generator(const PdeProblem& p, const FrozenField& fld, const Vector& x, Real t) {
  Real out = divergence_a_grad(p, fld, x, t);
  Vector gx;
  bool need_grad = static_cast<bool>(p.b) || static_cast<bool>(p.nonlinear);
  if (need_grad) gx = fld.grad(x);
  if (p.b) out -= p.b(x, t).dot(gx);
  Real ux = 0;
  if (p.c || p.nonlinear) ux = fld.value(x);
  if (p.c) out -= p.c(x, t) * ux;
  if (p.nonlinear) out -= p.nonlinear.value(ux, gx);
  return out;
}

/// One Crank-Nicolson step expressed as a static elliptic problem in the
/// unknown v = u(., t_{n+1}):
///   v - (h/2) L_{n+1} v = u_n + (h/2) (L_n u_n + f_n + f_{n+1})
/// mapped onto the static divergence-form template.
inline PdeProblem crank_nicolson_subproblem(const PdeProblem& p, const FrozenField& u_prev,
                                            Real t_n, Real h_step) {
  if (!p.parabolic()) throw ConfigError("crank_nicolson_subproblem: problem is not parabolic");
  if (!(h_step > 0)) throw ConfigError("crank_nicolson_subproblem: step must be positive");
  const Real t_next = t_n + h_step;
  const Real half = h_step / 2.0;

  PdeProblem q;
  q.name = p.name + "/cn_t" + std::to_string(t_next);
  q.domain = p.domain.spatial();
  if (p.a) {
    if (p.a.isotropic()) {
      auto base = p.a.scalar;
      q.a.scalar = [base, half, t_next](const Vector& x, Real) { return half * base(x, t_next); };
      if (p.a.scalar_grad) {
        auto bg = p.a.scalar_grad;
        q.a.scalar_grad = [bg, half, t_next](const Vector& x, Real) {
          return Vector(half * bg(x, t_next));
        };
      }
    } else {
      auto base = p.a.matrix;
      q.a.matrix = [base, half, t_next](const Vector& x, Real) {
        return Matrix(half * base(x, t_next));
      };
    }
  }
  if (p.b) {
    auto base = p.b;
    q.b = [base, half, t_next](const Vector& x, Real) { return Vector(half * base(x, t_next)); };
  }
  {
    auto base = p.c;
    q.c = [base, half, t_next](const Vector& x, Real) {
      return 1.0 + (base ? half * base(x, t_next) : 0.0);
    };
  }
  if (p.nonlinear) {
    auto base = p.nonlinear;
    q.nonlinear.value = [base, half](Real u, const Vector& g) { return half * base.value(u, g); };
    q.nonlinear.du = [base, half](Real u, const Vector& g) { return half * base.du(u, g); };
    q.nonlinear.dgrad = [base, half](Real u, const Vector& g) {
      return Vector(half * base.dgrad(u, g));
    };
  }
  {
    PdeProblem parent = p;  // the generator needs the parabolic coefficients
    parent.exact = nullptr;
    parent.exact_grad = nullptr;
    parent.exact_laplacian = nullptr;
    parent.exact_dt = nullptr;
    auto fsrc = p.f;
    q.f = [parent, u_prev, fsrc, half, t_n, t_next](const Vector& x, Real) {
      Real rhs = u_prev.value(x) + half * apply_generator(parent, u_prev, x, t_n);
      if (fsrc) rhs += half * (fsrc(x, t_n) + fsrc(x, t_next));
      return rhs;
    };
  }
  {
    auto base = p.g;
    q.g = [base, t_next](const Vector& x, const Vector& n, Real) { return base(x, n, t_next); };
  }
  q.bc = p.bc;
  if (p.exact) {
    auto base = p.exact;
    q.exact = [base, t_next](const Vector& x, Real) { return base(x, t_next); };
    if (p.exact_grad) {
      auto bg = p.exact_grad;
      q.exact_grad = [bg, t_next](const Vector& x, Real) { return bg(x, t_next); };
    }
    if (p.exact_laplacian) {
      auto bl = p.exact_laplacian;
      q.exact_laplacian = [bl, t_next](const Vector& x, Real) { return bl(x, t_next); };
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Exact-solution residual checks (transcription guards)
// ---------------------------------------------------------------------------

/// Strong-form residual of the recorded exact solution at (x, t):
///   [u*_t] - div(a grad u*) + b . grad u* + c u* + N(u*, grad u*) - f.
/// Uses the analytic derivative closures carried by the problem.
inline Real exact_strong_residual(const PdeProblem& p, const Vector& x, Real t = 0.0) {
  if (!p.exact || !p.exact_grad || !p.exact_laplacian)
    throw ConfigError("exact_strong_residual: problem lacks analytic exact-solution derivatives");
  Real u = p.exact(x, t);
  Vector gu = p.exact_grad(x, t);
  Real lap = p.exact_laplacian(x, t);
  Real res = 0;
  if (p.parabolic()) {
    if (!p.exact_dt) throw ConfigError("exact_strong_residual: missing exact_dt");
    res += p.exact_dt(x, t);
  }
  if (p.a) {
    if (p.a.isotropic()) {
      res -= p.a.scalar(x, t) * lap;
      if (p.a.scalar_grad) res -= p.a.scalar_grad(x, t).dot(gu);
    } else {
      throw ConfigError("exact_strong_residual: matrix diffusion needs a custom residual");
    }
  }
  if (p.b) res += p.b(x, t).dot(gu);
  if (p.c) res += p.c(x, t) * u;
  if (p.nonlinear) res += p.nonlinear.value(u, gu);
  if (p.f) res -= p.f(x, t);
  return res;
}

/// Spot-check of strong ellipticity: smallest eigenvalue of a(x) at sampled
/// interior points must stay above theta_ell.
inline bool check_ellipticity(const PdeProblem& p, Real theta_ell, int n_points,
                              std::uint64_t seed, Real* observed_min = nullptr) {
  if (!p.a) return theta_ell <= 0;
  Rng rng(seed, RngStream::Generic);
  Domain sp = p.domain.spatial();
  Real worst = std::numeric_limits<Real>::infinity();
  for (int k = 0; k < n_points; ++k) {
    Vector x = detail::sample_spatial_interior(sp, rng);
    Real t = p.parabolic() ? rng.uniform(0.0, p.domain.horizon) : 0.0;
    Real lambda;
    if (p.a.isotropic()) {
      lambda = p.a.scalar(x, t);
    } else {
      Matrix A = p.a.matrix(x, t);
      if (!A.isApprox(A.transpose(), 1e-12)) return false;  // symmetry is part of the contract
      Eigen::SelfAdjointEigenSolver<Matrix> es(A);
      lambda = es.eigenvalues().minCoeff();
    }
    worst = std::min(worst, lambda);
  }
  if (observed_min) *observed_min = worst;
  return worst >= theta_ell;
}

/// Finite-difference consistency check of the supplied nonlinearity partials.
inline bool check_nonlinearity(const Nonlinearity& nl, int dim, int trials, std::uint64_t seed,
                               Real tol = 1e-6) {
  if (!nl) return true;
  Rng rng(seed, RngStream::Generic);
  const Real h = 1e-6;
  for (int k = 0; k < trials; ++k) {
    Real u = rng.uniform(-2.0, 2.0);
    Vector g(dim);
    for (int i = 0; i < dim; ++i) g(i) = rng.uniform(-2.0, 2.0);
    Real fd_u = (nl.value(u + h, g) - nl.value(u - h, g)) / (2 * h);
    if (rel_diff(fd_u, nl.du(u, g)) > tol) return false;
    Vector dg = nl.dgrad(u, g);
    for (int i = 0; i < dim; ++i) {
      Vector gp = g, gm = g;
      gp(i) += h;
      gm(i) -= h;
      Real fd = (nl.value(u, gp) - nl.value(u, gm)) / (2 * h);
      if (rel_diff(fd, dg(i)) > tol) return false;
    }
  }
  return true;
}

}  // namespace wan
