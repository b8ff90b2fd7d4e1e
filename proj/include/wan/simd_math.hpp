#pragma once

// Vectorizable double-precision sin/cos used by the sinc activation. libm's
// scalar routines dominate batched evaluation cost, so the hot path uses a
// Cody-Waite reduction plus polynomial kernels written as a plain loop the
// compiler can auto-vectorize. Scalar and batched callers share the same
// kernel so both produce identical bits.

#include <cmath>
#include <cstdint>

#include <Eigen/Core>

namespace wan {

namespace detail {

// pi/2 split into three parts (Cody-Waite); exact reduction for |k| < 2^20.
inline constexpr double kPio2A = 1.57079632673412561417e+00;
inline constexpr double kPio2B = 6.07710050650619224932e-11;
inline constexpr double kPio2C = 2.02226624879595063154e-21;
inline constexpr double kTwoOverPi = 6.36619772367581382433e-01;
inline constexpr double kSincosFastBound = 1.0e6;

// fdlibm kernel polynomial coefficients on [-pi/4, pi/4]
inline constexpr double S1 = -1.66666666666666324348e-01;
inline constexpr double S2 = 8.33333333332248946124e-03;
inline constexpr double S3 = -1.98412698298579493134e-04;
inline constexpr double S4 = 2.75573137070700676789e-06;
inline constexpr double S5 = -2.50507602534068634195e-08;
inline constexpr double S6 = 1.58969099521155010221e-10;
inline constexpr double C1 = 4.16666666666666019037e-02;
inline constexpr double C2 = -1.38888888888741095749e-03;
inline constexpr double C3 = 2.48015872894767294178e-05;
inline constexpr double C4 = -2.75573143513906633035e-07;
inline constexpr double C5 = 2.08757232129817482790e-09;
inline constexpr double C6 = -1.13596475577881948265e-11;

inline void sincos_kernel(double x, double& s_out, double& c_out) {
  double k = std::rint(x * kTwoOverPi);
  double r = x - k * kPio2A;
  r -= k * kPio2B;
  r -= k * kPio2C;
  double r2 = r * r;
  double sp = S5 + r2 * S6;
  sp = S4 + r2 * sp;
  sp = S3 + r2 * sp;
  sp = S2 + r2 * sp;
  sp = S1 + r2 * sp;
  double s = r + r * r2 * sp;
  double cp = C5 + r2 * C6;
  cp = C4 + r2 * cp;
  cp = C3 + r2 * cp;
  cp = C2 + r2 * cp;
  cp = C1 + r2 * cp;
  double c = 1.0 - 0.5 * r2 + r2 * r2 * cp;
  auto q = static_cast<std::int64_t>(k);
  double t_s = (q & 1) ? c : s;
  double t_c = (q & 1) ? s : c;
  s_out = (q & 2) ? -t_s : t_s;
  c_out = ((q + 1) & 2) ? -t_c : t_c;
}

}  // namespace detail

/// sin and cos of every entry; identical bits to sincos_pair().
inline void vsincos(const double* x, double* s, double* c, Eigen::Index n) {
  bool any_big = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    double xi = x[i];
    any_big |= !(std::abs(xi) <= detail::kSincosFastBound);
    detail::sincos_kernel(xi, s[i], c[i]);
  }
  if (any_big) {
    // arguments beyond the reduction's exact range; defer to libm
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(std::abs(x[i]) <= detail::kSincosFastBound)) {
        s[i] = std::sin(x[i]);
        c[i] = std::cos(x[i]);
      }
    }
  }
}

inline void sincos_pair(double x, double& s, double& c) {
  if (!(std::abs(x) <= detail::kSincosFastBound)) {
    s = std::sin(x);
    c = std::cos(x);
    return;
  }
  detail::sincos_kernel(x, s, c);
}

}  // namespace wan
