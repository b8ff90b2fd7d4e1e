#pragma once

// Self-check suite behind `wan check`: finite-difference gradient checks,
// exact-solution residual gates, Monte-Carlo-vs-quadrature agreement, and the
// Crank-Nicolson order test. Each check reports observed value vs threshold.
// `inject_fault` flips a sign inside the activation-derivative check to prove
// the suite can actually fail.

#include "wan/config.hpp"
#include "wan/objective.hpp"

namespace wan {

struct CheckResult {
  std::string name;
  bool pass = false;
  Real observed = 0;
  Real threshold = 0;
  std::string note;
};

/// Number of checks in the documented manifest.
inline constexpr int kCheckCount = 8;

namespace checks_detail {

// Library-side Gauss-Legendre rule (the test suite keeps its own independent
// copy; this one serves the CLI's quadrature cross-check).
inline void gauss_nodes(int n, Real a, Real b, std::vector<Real>& x, std::vector<Real>& w) {
  x.assign(static_cast<size_t>(n), 0.0);
  w.assign(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    Real t = std::cos(problems::kPi * (i + 0.75) / (n + 0.5));
    Real p1 = 0, dp = 0;
    for (int it = 0; it < 100; ++it) {
      Real p0 = 1.0;
      p1 = t;
      for (int k = 2; k <= n; ++k) {
        Real p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      Real dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    {
      Real p0 = 1.0;
      p1 = t;
      for (int k = 2; k <= n; ++k) {
        Real p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
    }
    x[static_cast<size_t>(i)] = 0.5 * (b - a) * t + 0.5 * (a + b);
    w[static_cast<size_t>(i)] = (b - a) / ((1.0 - t * t) * dp * dp);
  }
}

inline MlpSpec rand_spec(Rng& rng, int d, int max_layers, int max_width) {
  const Activation acts[] = {Activation::Tanh, Activation::Softplus, Activation::Elu,
                             Activation::Sinc};
  MlpSpec s;
  s.input_dim = d;
  int L = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_layers)));
  for (int l = 0; l < L; ++l) {
    s.hidden_widths.push_back(2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_width - 1))));
    s.activations.push_back(acts[rng.below(4)]);
  }
  return s;
}

}  // namespace checks_detail

inline CheckResult check_activation_derivatives(bool inject_fault) {
  CheckResult r{"activation_derivative_fd", false, 0, 1e-7, ""};
  Rng rng(100, RngStream::Generic);
  const Real h = 1e-6;
  Real worst = 0;
  for (Activation a :
       {Activation::Tanh, Activation::Softplus, Activation::Elu, Activation::Sinc}) {
    for (int k = 0; k < 100; ++k) {
      Real z = rng.uniform(-4.0, 4.0);
      if (std::abs(z) < 1e-3) continue;
      Real fd = (activation_value(a, z + h) - activation_value(a, z - h)) / (2 * h);
      Real analytic = activation_derivative(a, z);
      if (inject_fault) analytic = -analytic;  // test fixture: wrong sign
      worst = std::max(worst, rel_diff(fd, analytic));
    }
  }
  r.observed = worst;
  r.pass = worst <= r.threshold;
  return r;
}

inline CheckResult check_network_input_gradients() {
  CheckResult r{"network_input_grad_fd", false, 0, 1e-5, ""};
  Rng rng(200, RngStream::Generic);
  Real worst = 0;
  for (int trial = 0; trial < 30; ++trial) {
    int d = 1 + static_cast<int>(rng.below(3));
    MlpSpec s = checks_detail::rand_spec(rng, d, 4, 8);
    ParamVector p = init_params(s, 300 + static_cast<std::uint64_t>(trial));
    Vector x(d);
    for (int i = 0; i < d; ++i) x(i) = rng.uniform(-1.0, 1.0);
    EvalRecord er = eval_with_input_grad(s, p, x);
    for (int i = 0; i < d; ++i) {
      Vector xp = x, xm = x;
      xp(i) += 1e-5;
      xm(i) -= 1e-5;
      Real fd = (eval_with_input_grad(s, p, xp).value - eval_with_input_grad(s, p, xm).value) /
                2e-5;
      worst = std::max(worst, rel_diff(er.input_grad(i), fd));
    }
  }
  r.observed = worst;
  r.pass = worst <= r.threshold;
  return r;
}

inline CheckResult check_objective_gradients() {
  CheckResult r{"objective_param_grad_fd", false, 0, 1e-5, ""};
  Real worst = 0;
  const char* names[] = {"smooth_poisson_d5", "nonl_cube_d5", "neum_cube_d5",
                         "parabolic_spacetime_d5"};
  Rng rng(400, RngStream::Generic);
  for (const char* nm : names) {
    const PdeProblem& p = find_problem(nm).problem;
    CollocationBatch batch =
        make_batch(p.domain, 10, p.domain.face_count(), p.parabolic() ? 5 : 0, 5);
    MlpSpec us = checks_detail::rand_spec(rng, p.domain.input_dim(), 2, 6);
    MlpSpec vs = checks_detail::rand_spec(rng, p.domain.input_dim(), 2, 6);
    ParamVector up = init_params(us, 7), vp = init_params(vs, 8);
    TestWeight w = analytic_weight(p.domain);
    LossForms forms;
    auto obj = [&](Tape& t, int slot) {
      ObjectiveContext ctx = make_context(p, batch, w, forms, 2.0, p.parabolic() ? 1.0 : 0.0);
      UOutputs u = eval_u_on_tape(t, slot, p, batch, ctx.coeffs);
      int vslot = t.watch_net(vs, vp, false);
      PhiOutputs phi = eval_phi_on_tape(t, vslot, p, batch, ctx.coeffs);
      return total_loss_on_tape(t, ctx, u, phi, nullptr);
    };
    Vector g = objective_param_gradient(obj, us, up);
    Vector fd = finite_difference_oracle(
        [&](const ParamVector& q) { return objective_value(obj, us, q); }, up, 1e-5);
    for (int i = 0; i < g.size(); ++i) worst = std::max(worst, rel_diff(g(i), fd(i)));
  }
  r.observed = worst;
  r.pass = worst <= r.threshold;
  return r;
}

inline CheckResult check_exact_interior_residuals() {
  CheckResult r{"exact_solution_interior_residuals", false, 0, 1e-8, ""};
  Real worst = 0;
  for (const auto& e : problem_library()) {
    Rng rng(500, RngStream::Generic);
    Domain sp = e.problem.domain.spatial();
    for (int k = 0; k < 1000; ++k) {
      Vector x = detail::sample_spatial_interior(sp, rng);
      Real t = e.problem.parabolic() ? rng.uniform(0.0, e.problem.domain.horizon) : 0.0;
      worst = std::max(worst, std::abs(exact_strong_residual(e.problem, x, t)));
    }
  }
  r.observed = worst;
  r.pass = worst <= r.threshold;
  return r;
}

inline CheckResult check_exact_boundary_data() {
  CheckResult r{"exact_solution_boundary_data", false, 0, 1e-12, ""};
  Real worst = 0;
  for (const auto& e : problem_library()) {
    const PdeProblem& p = e.problem;
    Rng rng(600, RngStream::Boundary);
    Matrix P, N;
    sample_boundary(p.domain, 10 * p.domain.face_count(), rng, P, N);
    for (int k = 0; k < P.rows(); ++k) {
      Vector x = P.row(k).head(p.dim()).transpose();
      Vector n = N.row(k).head(p.dim()).transpose();
      Real t = p.parabolic() ? P(k, p.dim()) : 0.0;
      Real ref = p.bc == BoundaryKind::Dirichlet ? p.exact(x, t) : p.exact_grad(x, t).dot(n);
      worst = std::max(worst, std::abs(p.g(x, n, t) - ref));
    }
    if (p.parabolic()) {
      Rng ra(601, RngStream::Initial);
      Matrix A = sample_initial(p.domain, 50, ra);
      for (int k = 0; k < A.rows(); ++k) {
        Vector x = A.row(k).head(p.dim()).transpose();
        worst = std::max(worst, std::abs(p.h(x, 0.0) - p.exact(x, 0.0)));
      }
    }
  }
  r.observed = worst;
  r.pass = worst <= r.threshold;
  return r;
}

/// MC pairing against a 128x128 tensor Gauss rule on a d=2 linear problem,
/// gated at 4 Monte Carlo standard errors.
inline CheckResult check_mc_vs_quadrature() {
  CheckResult r{"mc_vs_quadrature_d2", false, 0, 4.0, "units of MC standard error"};
  PdeProblem p = problems::eq_weak();
  MlpSpec us, vs;
  us.input_dim = vs.input_dim = 2;
  us.hidden_widths = {8, 8};
  us.activations = {Activation::Tanh, Activation::Softplus};
  vs.hidden_widths = {6, 6};
  vs.activations = {Activation::Tanh, Activation::Sinc};
  ParamVector up = init_params(us, 11), vp = init_params(vs, 12);
  TestWeight tw = analytic_weight(p.domain);

  // quadrature truth
  std::vector<Real> xs, wsx;
  checks_detail::gauss_nodes(128, 0.0, 1.0, xs, wsx);
  Real quad = 0;
  for (int i = 0; i < 128; ++i)
    for (int j = 0; j < 128; ++j) {
      Vector x(2);
      x << xs[static_cast<size_t>(i)], xs[static_cast<size_t>(j)];
      EvalRecord ue = eval_with_input_grad(us, up, x);
      EvalRecord ve = eval_with_input_grad(vs, vp, x);
      PointEval u = to_point_eval(ue, 2);
      PointEval phi;
      Real w = boundary_weight(p.domain, x);
      Vector gw = boundary_weight_gradient(p.domain, x);
      phi.value = w * ve.value;
      phi.grad = w * ve.input_grad + gw * ve.value;
      quad += wsx[static_cast<size_t>(i)] * wsx[static_cast<size_t>(j)] *
              weak_integrand(p, x, 0.0, u, phi);
    }

  // MC estimate, averaged over a handful of replicates
  int reps = 8, n = 4096;
  Real se_one = 0, err_mean = 0;
  for (int rep = 0; rep < reps; ++rep) {
    CollocationBatch b = make_batch(p.domain, n, 0, 0, 900 + static_cast<std::uint64_t>(rep));
    BatchCoefficients co = build_coefficients(p, b, tw);
    PointSetEval ue = eval_net_on(us, up, b.interior, true);
    PointSetEval ve = eval_net_on(vs, vp, b.interior, true);
    PointSetEval phi = compose_phi(ve, co.w_vals, co.w_grads);
    PairingStats st = pairing_stats(p, b, co, ue, phi, {}, {}, {});
    err_mean += st.estimate - quad;
    se_one = st.std_error;
  }
  err_mean /= reps;
  Real se_mean = se_one / std::sqrt(static_cast<Real>(reps));
  r.observed = std::abs(err_mean) / se_mean;
  r.pass = r.observed <= r.threshold;
  return r;
}

/// Crank-Nicolson order on the 1-D heat equation, with the assembled elliptic
/// subproblems solved (near-)exactly by a tridiagonal factorization: halving
/// the time step must cut the error by at least 3.6.
inline CheckResult check_cn_order() {
  CheckResult r{"crank_nicolson_order", false, 0, 3.6, "error ratio err(h)/err(h/2)"};
  const Real kp = problems::kPi;
  PdeProblem heat;
  heat.name = "heat_1d_check";
  heat.domain = Domain::time_product(
      Domain::hyperrectangle(Vector::Zero(1), Vector::Ones(1)), 0.1);
  heat.a = problems::unit_diffusion();
  heat.g = [](const Vector&, const Vector&, Real) { return 0.0; };
  heat.h = [kp](const Vector& x, Real) { return std::sin(kp * x(0)); };
  auto exact = [kp](Real x, Real t) { return std::sin(kp * x) * std::exp(-kp * kp * t); };

  const int m = 1000;
  const Real dx = 1.0 / m;
  auto run = [&](int n_steps) {
    Real dt = heat.domain.horizon / n_steps;
    std::vector<Real> u(static_cast<size_t>(m + 1));
    for (int j = 0; j <= m; ++j) u[static_cast<size_t>(j)] = exact(j * dx, 0.0);
    for (int step = 0; step < n_steps; ++step) {
      auto uprev = std::make_shared<std::vector<Real>>(u);
      FrozenField fld;
      fld.value = [uprev, dx, m](const Vector& x) {
        int j = std::clamp(static_cast<int>(std::lround(x(0) / dx)), 0, m);
        return (*uprev)[static_cast<size_t>(j)];
      };
      fld.div_a_grad = [uprev, dx, m](const Vector& x, Real) {
        int j = std::clamp(static_cast<int>(std::lround(x(0) / dx)), 1, m - 1);
        const auto& v = *uprev;
        return (v[static_cast<size_t>(j + 1)] - 2.0 * v[static_cast<size_t>(j)] +
                v[static_cast<size_t>(j - 1)]) / (dx * dx);
      };
      PdeProblem q = crank_nicolson_subproblem(heat, fld, step * dt, dt);
      Real ac = q.a.scalar(Vector::Zero(1), 0.0);
      Real cc = q.c(Vector::Zero(1), 0.0);
      int nn = m - 1;
      std::vector<Real> diag(static_cast<size_t>(nn), cc + 2.0 * ac / (dx * dx));
      std::vector<Real> off(static_cast<size_t>(nn), -ac / (dx * dx));
      std::vector<Real> rhs(static_cast<size_t>(nn));
      for (int j = 1; j <= nn; ++j) {
        Vector x(1);
        x << j * dx;
        rhs[static_cast<size_t>(j - 1)] = q.f(x, 0.0);
      }
      std::vector<Real> cp(static_cast<size_t>(nn)), dp(static_cast<size_t>(nn));
      cp[0] = off[0] / diag[0];
      dp[0] = rhs[0] / diag[0];
      for (int j = 1; j < nn; ++j) {
        Real mm = diag[static_cast<size_t>(j)] - off[static_cast<size_t>(j)] * cp[static_cast<size_t>(j - 1)];
        cp[static_cast<size_t>(j)] = off[static_cast<size_t>(j)] / mm;
        dp[static_cast<size_t>(j)] = (rhs[static_cast<size_t>(j)] -
                                      off[static_cast<size_t>(j)] * dp[static_cast<size_t>(j - 1)]) / mm;
      }
      u[static_cast<size_t>(nn)] = dp[static_cast<size_t>(nn - 1)];
      for (int j = nn - 2; j >= 0; --j)
        u[static_cast<size_t>(j + 1)] = dp[static_cast<size_t>(j)] - cp[static_cast<size_t>(j)] * u[static_cast<size_t>(j + 2)];
      u[0] = 0.0;
      u[static_cast<size_t>(m)] = 0.0;
    }
    Real err = 0;
    for (int j = 0; j <= m; ++j)
      err = std::max(err, std::abs(u[static_cast<size_t>(j)] - exact(j * dx, heat.domain.horizon)));
    return err;
  };
  Real e4 = run(4), e8 = run(8);
  r.observed = e4 / e8;
  r.pass = r.observed >= r.threshold;
  r.note = "err(4 steps)=" + std::to_string(e4) + " err(8 steps)=" + std::to_string(e8);
  return r;
}

inline CheckResult check_theorem1_quick() {
  CheckResult r{"theorem1_pairing_sanity", false, 0, 3.0, "worst |estimate|/SE over cases"};
  const char* names[] = {"smooth_poisson_d5", "poisson_L_d5"};
  Real worst = 0;
  for (const char* nm : names) {
    const PdeProblem& p = find_problem(nm).problem;
    CollocationBatch batch = make_batch(p.domain, 4000, 0, 0, 31);
    TestWeight tw = analytic_weight(p.domain);
    BatchCoefficients co = build_coefficients(p, batch, tw);
    PointSetEval u = eval_exact_on(p, batch.interior, true);
    for (int rep = 0; rep < 3; ++rep) {
      MlpSpec vs = default_phi_spec(p.dim());
      vs.hidden_widths.assign(3, 12);
      vs.activations.assign(3, Activation::Tanh);
      ParamVector vp = init_params(vs, 40 + static_cast<std::uint64_t>(rep));
      PointSetEval v = eval_net_on(vs, vp, batch.interior, true);
      PointSetEval phi = compose_phi(v, co.w_vals, co.w_grads);
      PairingStats st = pairing_stats(p, batch, co, u, phi, {}, {}, {});
      worst = std::max(worst, std::abs(st.estimate) / st.std_error);
    }
  }
  r.observed = worst;
  r.pass = worst <= r.threshold;
  return r;
}

/// The whole manifest, in order. Size matches kCheckCount.
inline std::vector<CheckResult> run_check_suite(bool inject_fault = false) {
  std::vector<CheckResult> out;
  out.push_back(check_activation_derivatives(inject_fault));
  out.push_back(check_network_input_gradients());
  out.push_back(check_objective_gradients());
  out.push_back(check_exact_interior_residuals());
  out.push_back(check_exact_boundary_data());
  out.push_back(check_mc_vs_quadrature());
  out.push_back(check_cn_order());
  out.push_back(check_theorem1_quick());
  if (static_cast<int>(out.size()) != kCheckCount)
    throw Error("check manifest drifted from kCheckCount");
  return out;
}

}  // namespace wan
