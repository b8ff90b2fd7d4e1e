#pragma once

// 1-D heat-equation driver used by the Crank-Nicolson order tests: the
// library assembles each time step as a static elliptic problem, and this
// driver solves those subproblems (near-)exactly on a fine grid with a
// tridiagonal solve, isolating the time-discretization error.

#include "wan/library.hpp"

#include <vector>

namespace oracle {

using wan::PdeProblem;
using wan::Real;
using wan::Vector;

/// u_t - u_xx = 0 on (0,1), u* = sin(pi x) e^{-pi^2 t}, Dirichlet 0.
inline PdeProblem heat_1d(Real T) {
  using wan::problems::kPi;
  PdeProblem p;
  p.name = "heat_1d";
  wan::Domain sp = wan::Domain::hyperrectangle(Vector::Zero(1), Vector::Ones(1));
  p.domain = wan::Domain::time_product(sp, T);
  p.a = wan::problems::unit_diffusion();
  auto ustar = [](const Vector& x, Real t) {
    return std::sin(kPi * x(0)) * std::exp(-kPi * kPi * t);
  };
  p.exact = ustar;
  p.exact_grad = [](const Vector& x, Real t) {
    Vector g(1);
    g(0) = kPi * std::cos(kPi * x(0)) * std::exp(-kPi * kPi * t);
    return g;
  };
  p.exact_laplacian = [ustar](const Vector& x, Real t) { return -kPi * kPi * ustar(x, t); };
  p.exact_dt = [ustar](const Vector& x, Real t) { return -kPi * kPi * ustar(x, t); };
  p.g = [](const Vector&, const Vector&, Real) { return 0.0; };
  p.h = [](const Vector& x, Real) { return std::sin(kPi * x(0)); };
  return p;
}

/// Runs n_steps Crank-Nicolson steps, solving each assembled elliptic
/// subproblem exactly on a grid of m+1 nodes. Returns the max-norm error
/// against the exact solution at the final time.
inline Real cn_heat_error(const PdeProblem& heat, int n_steps, int m) {
  const Real T = heat.domain.horizon;
  const Real dt = T / n_steps;
  const Real dx = 1.0 / m;

  std::vector<Real> u(static_cast<size_t>(m + 1));
  for (int j = 0; j <= m; ++j) {
    Vector x(1);
    x << j * dx;
    u[static_cast<size_t>(j)] = heat.h(x, 0.0);
  }

  for (int step = 0; step < n_steps; ++step) {
    Real t_n = step * dt;

    // frozen grid field for the previous solution; queried at grid nodes only
    auto uprev = std::make_shared<std::vector<Real>>(u);
    wan::FrozenField fld;
    fld.value = [uprev, dx, m](const Vector& x) {
      int j = static_cast<int>(std::lround(x(0) / dx));
      return (*uprev)[static_cast<size_t>(std::clamp(j, 0, m))];
    };
    fld.div_a_grad = [uprev, dx, m](const Vector& x, Real) {
      int j = static_cast<int>(std::lround(x(0) / dx));
      j = std::clamp(j, 1, m - 1);
      const auto& v = *uprev;
      return (v[static_cast<size_t>(j + 1)] - 2.0 * v[static_cast<size_t>(j)] +
              v[static_cast<size_t>(j - 1)]) /
             (dx * dx);
    };

    PdeProblem q = wan::crank_nicolson_subproblem(heat, fld, t_n, dt);

    // tridiagonal solve of -a v'' + c v = f with Dirichlet ends
    Real a_coef = q.a.scalar(Vector::Zero(1), 0.0);
    Real c_coef = q.c(Vector::Zero(1), 0.0);
    int n = m - 1;
    std::vector<Real> diag(static_cast<size_t>(n), c_coef + 2.0 * a_coef / (dx * dx));
    std::vector<Real> off(static_cast<size_t>(n), -a_coef / (dx * dx));
    std::vector<Real> rhs(static_cast<size_t>(n));
    Vector nvec = Vector::Zero(1);
    for (int j = 1; j <= n; ++j) {
      Vector x(1);
      x << j * dx;
      rhs[static_cast<size_t>(j - 1)] = q.f(x, 0.0);
    }
    {
      Vector x0(1), x1(1);
      x0 << 0.0;
      x1 << 1.0;
      rhs[0] += a_coef / (dx * dx) * q.g(x0, nvec, 0.0);
      rhs[static_cast<size_t>(n - 1)] += a_coef / (dx * dx) * q.g(x1, nvec, 0.0);
    }
    // Thomas algorithm
    std::vector<Real> cp(static_cast<size_t>(n)), dp(static_cast<size_t>(n));
    cp[0] = off[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for (int j = 1; j < n; ++j) {
      Real mlt = diag[static_cast<size_t>(j)] - off[static_cast<size_t>(j)] * cp[static_cast<size_t>(j - 1)];
      cp[static_cast<size_t>(j)] = off[static_cast<size_t>(j)] / mlt;
      dp[static_cast<size_t>(j)] =
          (rhs[static_cast<size_t>(j)] - off[static_cast<size_t>(j)] * dp[static_cast<size_t>(j - 1)]) / mlt;
    }
    std::vector<Real> v(static_cast<size_t>(n));
    v[static_cast<size_t>(n - 1)] = dp[static_cast<size_t>(n - 1)];
    for (int j = n - 2; j >= 0; --j)
      v[static_cast<size_t>(j)] = dp[static_cast<size_t>(j)] - cp[static_cast<size_t>(j)] * v[static_cast<size_t>(j + 1)];

    Vector xe(1);
    xe << 0.0;
    u[0] = q.g(xe, nvec, 0.0);
    xe << 1.0;
    u[static_cast<size_t>(m)] = q.g(xe, nvec, 0.0);
    for (int j = 1; j <= n; ++j) u[static_cast<size_t>(j)] = v[static_cast<size_t>(j - 1)];
  }

  Real err = 0;
  for (int j = 0; j <= m; ++j) {
    Vector x(1);
    x << j * dx;
    err = std::max(err, std::abs(u[static_cast<size_t>(j)] - heat.exact(x, T)));
  }
  return err;
}

}  // namespace oracle
