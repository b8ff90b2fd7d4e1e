#pragma once

// Test-side quadrature oracle: Gauss-Legendre nodes/weights via Newton on the
// Legendre recurrence. Independent of the library under test.

#include <cmath>
#include <vector>

namespace oracle {

struct GaussRule {
  std::vector<double> nodes;    // on [a, b]
  std::vector<double> weights;
};

inline GaussRule gauss_legendre(int n, double a, double b) {
  GaussRule r;
  r.nodes.resize(static_cast<size_t>(n));
  r.weights.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    // Chebyshev initial guess, Newton refinement
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[static_cast<size_t>(i)] = 0.5 * (b - a) * x + 0.5 * (a + b);
    r.weights[static_cast<size_t>(i)] = 0.5 * (b - a) * w;
  }
  return r;
}

/// Tensor-product integral of f(x1, x2) over [a1,b1] x [a2,b2].
template <class F>
double gauss2d(int n, double a1, double b1, double a2, double b2, F&& f) {
  GaussRule g1 = gauss_legendre(n, a1, b1), g2 = gauss_legendre(n, a2, b2);
  double sum = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      sum += g1.weights[static_cast<size_t>(i)] * g2.weights[static_cast<size_t>(j)] *
             f(g1.nodes[static_cast<size_t>(i)], g2.nodes[static_cast<size_t>(j)]);
  return sum;
}

}  // namespace oracle
