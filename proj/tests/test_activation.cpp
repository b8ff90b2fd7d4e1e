#include <catch2/catch_amalgamated.hpp>

#include "wan/activation.hpp"

#include <cmath>

using namespace wan;

namespace {
const Activation kAll[] = {Activation::Tanh, Activation::Softplus, Activation::Elu,
                           Activation::Sinc};
}

TEST_CASE("activation reference values") {
  CHECK(activation_value(Activation::Softplus, 0.0) == Catch::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(activation_value(Activation::Sinc, 0.0) == 1.0);
  CHECK(activation_derivative(Activation::Sinc, 0.0) == 0.0);
  CHECK(activation_value(Activation::Elu, -1.0) ==
        Catch::Approx(std::exp(-1.0) - 1.0).epsilon(1e-14));
  CHECK(activation_value(Activation::Tanh, 0.7) == Catch::Approx(std::tanh(0.7)));
}

TEST_CASE("activations and derivatives finite up to |z| = 700") {
  for (Activation a : kAll) {
    for (Real z : {-700.0, -350.0, -30.0, -1.0, 0.0, 1.0, 30.0, 350.0, 700.0}) {
      INFO(to_string(a) << " at z=" << z);
      CHECK(std::isfinite(activation_value(a, z)));
      CHECK(std::isfinite(activation_derivative(a, z)));
      CHECK(std::isfinite(activation_second_derivative(a, z)));
    }
  }
}

TEST_CASE("continuity at zero, including the sinc removable point") {
  for (Activation a : kAll) {
    Real v0 = activation_value(a, 0.0);
    Real d0 = activation_derivative(a, 0.0);
    for (Real eps : {1e-7, 1e-6, 1e-5}) {
      INFO(to_string(a) << " eps=" << eps);
      CHECK(std::abs(activation_value(a, eps) - v0) < 2 * eps);
      CHECK(std::abs(activation_value(a, -eps) - v0) < 2 * eps);
      CHECK(std::abs(activation_derivative(a, eps) - d0) < 1e-4);
      CHECK(std::abs(activation_derivative(a, -eps) - d0) < 1e-4);
    }
  }
  // second derivative of sinc approaches -1/3 from both branches
  CHECK(activation_second_derivative(Activation::Sinc, 0.0) == Catch::Approx(-1.0 / 3.0));
  CHECK(activation_second_derivative(Activation::Sinc, 1e-3) ==
        Catch::Approx(-1.0 / 3.0).margin(1e-5));
}

TEST_CASE("derivatives match central finite differences") {
  Rng rng(7, RngStream::Generic);
  const Real h = 1e-6;
  for (Activation a : kAll) {
    for (int i = 0; i < 200; ++i) {
      Real z = rng.uniform(-4.0, 4.0);
      if (std::abs(z) < 1e-3) continue;  // keep clear of the elu kink for d2
      Real fd1 = (activation_value(a, z + h) - activation_value(a, z - h)) / (2 * h);
      Real fd2 = (activation_derivative(a, z + h) - activation_derivative(a, z - h)) / (2 * h);
      INFO(to_string(a) << " z=" << z);
      CHECK(rel_diff(fd1, activation_derivative(a, z)) < 1e-8);
      CHECK(rel_diff(fd2, activation_second_derivative(a, z)) < 1e-7);
    }
  }
}

TEST_CASE("batch activation agrees with scalar path") {
  Rng rng(3, RngStream::Generic);
  Matrix P(17, 5);
  for (int i = 0; i < P.rows(); ++i)
    for (int j = 0; j < P.cols(); ++j) P(i, j) = rng.uniform(-40.0, 40.0);
  P(0, 0) = 0.0;      // removable point
  P(1, 1) = -700.0;   // extreme range
  P(2, 2) = 700.0;
  P(3, 3) = 5e-5;     // inside the sinc Taylor branch
  // The batch path reaches tanh/softplus through exp-based identities, so
  // results may differ from libm by a few ulps (absolutely, near saturation).
  auto close = [](Real a, Real b) {
    return std::abs(a - b) <= 1e-12 + 1e-9 * std::max(std::abs(a), std::abs(b));
  };
  for (Activation a : kAll) {
    Matrix V, D1, D2;
    activation_batch(a, P, V, &D1, &D2);
    for (int i = 0; i < P.rows(); ++i)
      for (int j = 0; j < P.cols(); ++j) {
        INFO(to_string(a) << " at " << P(i, j));
        CHECK(close(V(i, j), activation_value(a, P(i, j))));
        CHECK(close(D1(i, j), activation_derivative(a, P(i, j))));
        CHECK(close(D2(i, j), activation_second_derivative(a, P(i, j))));
      }
  }
}
