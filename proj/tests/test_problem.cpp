#include <catch2/catch_amalgamated.hpp>

#include "wan/library.hpp"
#include "support/cn_reference.hpp"
#include "support/quadrature.hpp"

using namespace wan;

namespace {

Vector random_point_in(const Domain& spatial, Rng& rng) {
  return detail::sample_spatial_interior(spatial, rng);
}

MlpSpec tiny_net(int d, std::uint64_t = 0) {
  MlpSpec s;
  s.input_dim = d;
  s.hidden_widths = {8, 8};
  s.activations = {Activation::Tanh, Activation::Softplus};
  return s;
}

}  // namespace

TEST_CASE("weak integrand: direct substitution for the Poisson template") {
  PdeProblem p = problems::eq_weak();  // a = I, b = 0, c = 0, f = -2
  Vector x(2);
  x << 0.3, 0.8;
  PointEval u;
  u.value = x(0) * x(0);
  u.grad = Vector::Zero(2);
  u.grad(0) = 2.0 * x(0);
  PointEval phi;
  phi.value = 0.7;
  phi.grad = Vector(2);
  phi.grad << -0.2, 1.1;
  // I = grad u . grad phi - f phi = 2 x1 d1phi + 2 phi
  CHECK(weak_integrand(p, x, 0.0, u, phi) ==
        Catch::Approx(2.0 * x(0) * phi.grad(0) + 2.0 * phi.value).epsilon(1e-14));

  PointEval zero_phi;
  zero_phi.value = 0.0;
  zero_phi.grad = Vector::Zero(2);
  CHECK(weak_integrand(p, x, 0.0, u, zero_phi) == 0.0);
}

TEST_CASE("weak integrand: nonlinear problem terms") {
  PdeProblem p = problems::nonl_cube(3);
  Vector x(3);
  x << 0.2, -0.5, 0.7;
  PointEval u;
  u.value = 0.4;
  u.grad = Vector(3);
  u.grad << 1.0, -2.0, 0.5;
  PointEval phi;
  phi.value = -0.3;
  phi.grad = Vector(3);
  phi.grad << 0.1, 0.2, 0.3;
  Real ax = 1.0 + x.squaredNorm();
  Real expected = ax * u.grad.dot(phi.grad) + 0.5 * u.grad.squaredNorm() * phi.value -
                  p.f(x, 0.0) * phi.value;
  CHECK(weak_integrand(p, x, 0.0, u, phi) == Catch::Approx(expected).epsilon(1e-14));
}

TEST_CASE("weak integrand is linear in u for linear problems with f = 0") {
  PdeProblem p = problems::poisson_L(2);
  p.f = nullptr;
  Rng rng(3, RngStream::Generic);
  Vector x(2);
  x << -0.4, 0.3;
  PointEval u, phi;
  u.value = 0.8;
  u.grad = Vector(2);
  u.grad << 0.5, -0.1;
  phi.value = 1.2;
  phi.grad = Vector(2);
  phi.grad << -0.7, 0.2;
  Real base = weak_integrand(p, x, 0.0, u, phi);
  for (Real alpha : {2.0, -3.0, 0.25}) {
    PointEval ua;
    ua.value = alpha * u.value;
    ua.grad = alpha * u.grad;
    CHECK(weak_integrand(p, x, 0.0, ua, phi) == Catch::Approx(alpha * base).epsilon(1e-13));
  }
}

TEST_CASE("every library exact solution satisfies its strong form") {
  for (const auto& e : problem_library()) {
    const PdeProblem& p = e.problem;
    REQUIRE(p.has_exact());
    Domain sp = p.domain.spatial();
    Rng rng(101, RngStream::Generic);
    Real worst = 0;
    for (int k = 0; k < 1000; ++k) {
      Vector x = random_point_in(sp, rng);
      Real t = p.parabolic() ? rng.uniform(0.0, p.domain.horizon) : 0.0;
      worst = std::max(worst, std::abs(exact_strong_residual(p, x, t)));
    }
    INFO(e.name << " worst interior residual " << worst);
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("library boundary and initial data match the exact solution") {
  for (const auto& e : problem_library()) {
    const PdeProblem& p = e.problem;
    Rng rng(55, RngStream::Boundary);
    Matrix P, N;
    sample_boundary(p.domain, 10 * p.domain.face_count(), rng, P, N);
    Real worst = 0;
    for (int k = 0; k < P.rows(); ++k) {
      Vector x = P.row(k).head(p.dim()).transpose();
      Vector n = N.row(k).head(p.dim()).transpose();
      Real t = p.parabolic() ? P(k, p.dim()) : 0.0;
      Real data = p.g(x, n, t);
      Real ref = p.bc == BoundaryKind::Dirichlet ? p.exact(x, t) : p.exact_grad(x, t).dot(n);
      worst = std::max(worst, std::abs(data - ref));
    }
    INFO(e.name);
    CHECK(worst <= 1e-12);

    if (p.parabolic()) {
      Rng ra(56, RngStream::Initial);
      Matrix A = sample_initial(p.domain, 50, ra);
      Real winit = 0;
      for (int k = 0; k < A.rows(); ++k) {
        Vector x = A.row(k).head(p.dim()).transpose();
        winit = std::max(winit, std::abs(p.h(x, 0.0) - p.exact(x, 0.0)));
      }
      CHECK(winit <= 1e-12);
    }
  }
}

TEST_CASE("analytic exact-solution derivatives agree with finite differences") {
  // guards transcription errors in the closed-form derivative expressions
  const Real h = 1e-6;
  for (const auto& e : problem_library()) {
    const PdeProblem& p = e.problem;
    Domain sp = p.domain.spatial();
    Rng rng(77, RngStream::Generic);
    for (int k = 0; k < 25; ++k) {
      Vector x = random_point_in(sp, rng);
      if (e.name == "eq_weak" && std::abs(x(0) - 0.5) < 1e-3) continue;  // derivative kink
      Real t = p.parabolic() ? rng.uniform(0.0, p.domain.horizon) : 0.0;
      Vector g = p.exact_grad(x, t);
      Real lap_fd = 0;
      for (int i = 0; i < p.dim(); ++i) {
        Vector xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        Real fd = (p.exact(xp, t) - p.exact(xm, t)) / (2 * h);
        INFO(e.name << " dim " << i);
        CHECK(std::abs(fd - g(i)) < 1e-6 * std::max(1.0, std::abs(g(i))));
        lap_fd += (p.exact_grad(xp, t)(i) - p.exact_grad(xm, t)(i)) / (2 * h);
      }
      CHECK(std::abs(lap_fd - p.exact_laplacian(x, t)) <
            1e-5 * std::max(1.0, std::abs(p.exact_laplacian(x, t))));
      if (p.parabolic()) {
        Real dt_fd = (p.exact(x, t + h) - p.exact(x, t - h)) / (2 * h);
        CHECK(std::abs(dt_fd - p.exact_dt(x, t)) < 1e-6 * std::max(1.0, std::abs(dt_fd)));
      }
    }
  }
}

TEST_CASE("ellipticity spot checks and nonlinearity derivative checks") {
  for (const auto& e : problem_library()) {
    Real observed = 0;
    INFO(e.name);
    CHECK(check_ellipticity(e.problem, e.theta_ell, 1000, 9, &observed));
    CHECK(observed >= e.theta_ell);
    CHECK(check_nonlinearity(e.problem.nonlinear, e.problem.dim(), 50, 10));
  }
}

TEST_CASE("Crank-Nicolson subproblem: zero data gives the zero solution") {
  PdeProblem heat = oracle::heat_1d(1.0);
  heat.h = [](const Vector&, Real) { return 0.0; };
  heat.f = nullptr;
  FrozenField zero = make_analytic_field([](const Vector&) { return 0.0; },
                                         [](const Vector&) { return Vector(Vector::Zero(1)); });
  PdeProblem q = crank_nicolson_subproblem(heat, zero, 0.0, 0.1);
  Vector x(1);
  x << 0.37;
  CHECK(q.f(x, 0.0) == 0.0);
  CHECK(q.g(x, Vector::Zero(1), 0.0) == 0.0);
  CHECK(q.c(x, 0.0) == 1.0);
  CHECK(q.a.scalar(x, 0.0) == 0.05);
}

TEST_CASE("Crank-Nicolson scalar ODE reduction") {
  // u_t = -u (no space dependence): one step from u = 1 gives (1-h/2)/(1+h/2)
  PdeProblem p;
  p.name = "ode";
  p.domain = Domain::time_product(Domain::hyperrectangle(Vector::Zero(1), Vector::Ones(1)), 1.0);
  p.c = [](const Vector&, Real) { return 1.0; };
  p.g = [](const Vector&, const Vector&, Real) { return 0.0; };
  p.h = [](const Vector&, Real) { return 1.0; };
  FrozenField one = make_analytic_field([](const Vector&) { return 1.0; },
                                        [](const Vector&) { return Vector(Vector::Zero(1)); });
  const Real h = 0.2;
  PdeProblem q = crank_nicolson_subproblem(p, one, 0.0, h);
  Vector x(1);
  x << 0.5;
  // no diffusion/drift: the subproblem reduces to c v = f pointwise
  Real v = q.f(x, 0.0) / q.c(x, 0.0);
  CHECK(v == Catch::Approx((1.0 - h / 2) / (1.0 + h / 2)).epsilon(1e-14));
}

TEST_CASE("Crank-Nicolson time-stepping is second order on the heat equation") {
  PdeProblem heat = oracle::heat_1d(0.1);
  Real e4 = oracle::cn_heat_error(heat, 4, 1000);
  Real e8 = oracle::cn_heat_error(heat, 8, 1000);
  INFO("err(N=4)=" << e4 << " err(N=8)=" << e8 << " ratio " << e4 / e8);
  CHECK(e4 / e8 > 3.0);
}

TEST_CASE("integration by parts: weak and strong pairings agree under quadrature") {
  // linear d=2 problem with all terms active, a smooth network u, and a
  // polynomial test function vanishing on the boundary of (0,1)^2
  PdeProblem p;
  p.name = "ibp";
  p.domain = Domain::hyperrectangle(Vector::Zero(2), Vector::Ones(2));
  p.a = problems::one_plus_norm_sq_diffusion();
  p.b = [](const Vector& x, Real) {
    Vector b(2);
    b << x(1), -x(0);
    return b;
  };
  p.c = [](const Vector& x, Real) { return 1.0 + x(0) * x(0); };
  p.f = [](const Vector& x, Real) { return std::sin(3.0 * x(0)) + x(1); };

  MlpSpec us = tiny_net(2);
  ParamVector up = init_params(us, 17);
  auto uf = make_network_field(std::make_shared<MlpSpec>(us), std::make_shared<ParamVector>(up));

  auto phi = [](Real x1, Real x2) { return x1 * (1 - x1) * x2 * (1 - x2); };
  auto phi_g1 = [](Real x1, Real x2) { return (1 - 2 * x1) * x2 * (1 - x2); };
  auto phi_g2 = [](Real x1, Real x2) { return x1 * (1 - x1) * (1 - 2 * x2); };

  Real weak = oracle::gauss2d(64, 0, 1, 0, 1, [&](Real x1, Real x2) {
    Vector x(2);
    x << x1, x2;
    EvalRecord er = eval_with_input_grad(us, up, x);
    PointEval u = to_point_eval(er, 2);
    PointEval ph;
    ph.value = phi(x1, x2);
    ph.grad = Vector(2);
    ph.grad << phi_g1(x1, x2), phi_g2(x1, x2);
    return weak_integrand(p, x, 0.0, u, ph);
  });

  Real strong = oracle::gauss2d(64, 0, 1, 0, 1, [&](Real x1, Real x2) {
    Vector x(2);
    x << x1, x2;
    EvalRecord er = eval_with_input_grad(us, up, x);
    Real lhs = -divergence_a_grad(p, uf, x, 0.0) + p.b(x, 0.0).dot(er.input_grad) +
               p.c(x, 0.0) * er.value - p.f(x, 0.0);
    return lhs * phi(x1, x2);
  });

  INFO("weak " << weak << " strong " << strong);
  CHECK(rel_diff(weak, strong, 0.01) < 1e-4);
}
