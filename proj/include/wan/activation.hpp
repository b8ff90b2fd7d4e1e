#pragma once

#include "wan/common.hpp"
#include "wan/simd_math.hpp"

#include <cmath>
#include <string>

namespace wan {

enum class Activation { Tanh, Softplus, Elu, Sinc, Identity };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Softplus: return "softplus";
    case Activation::Elu: return "elu";
    case Activation::Sinc: return "sinc";
    case Activation::Identity: return "identity";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "softplus") return Activation::Softplus;
  if (s == "elu") return Activation::Elu;
  if (s == "sinc") return Activation::Sinc;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation tag '" + s + "'");
}

// sinc switches to a Taylor expansion for |z| < 1e-4 where the closed forms
// of the derivatives cancel catastrophically.
inline constexpr Real kSincTaylorCut = 1e-4;

inline Real activation_value(Activation a, Real z) {
  switch (a) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Softplus: return std::fmax(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    case Activation::Elu: return z >= 0 ? z : std::expm1(z);
    case Activation::Sinc: {
      if (std::abs(z) < kSincTaylorCut) {
        Real z2 = z * z;
        return 1.0 - z2 / 6.0 + z2 * z2 / 120.0;
      }
      Real s, c;
      sincos_pair(z, s, c);
      return s / z;
    }
    case Activation::Identity: return z;
  }
  return 0.0;
}

inline Real activation_derivative(Activation a, Real z) {
  switch (a) {
    case Activation::Tanh: {
      Real t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Softplus: {
      Real e = std::exp(-std::abs(z));
      Real s = 1.0 / (1.0 + e);
      return z >= 0 ? s : 1.0 - s;
    }
    case Activation::Elu: return z >= 0 ? 1.0 : std::exp(z);
    case Activation::Sinc: {
      if (std::abs(z) < kSincTaylorCut) {
        Real z2 = z * z;
        return z * (-1.0 / 3.0 + z2 / 30.0);
      }
      Real s, c;
      sincos_pair(z, s, c);
      Real v = s / z;
      return (c - v) / z;
    }
    case Activation::Identity: return 1.0;
  }
  return 0.0;
}

inline Real activation_second_derivative(Activation a, Real z) {
  switch (a) {
    case Activation::Tanh: {
      Real t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::Softplus: {
      Real e = std::exp(-std::abs(z));
      Real s = 1.0 / (1.0 + e);
      // logistic'(z) is symmetric in z
      return s * (1.0 - s);
    }
    case Activation::Elu: return z >= 0 ? 0.0 : std::exp(z);
    case Activation::Sinc: {
      if (std::abs(z) < kSincTaylorCut) {
        Real z2 = z * z;
        return -1.0 / 3.0 + z2 / 10.0;
      }
      Real s, c;
      sincos_pair(z, s, c);
      Real v = s / z;
      return (2.0 * v - 2.0 * c - z * s) / (z * z);
    }
    case Activation::Identity: return 0.0;
  }
  return 0.0;
}

// Batched forms. D1/D2 are filled only when requested. Intermediates are
// materialized once; the transcendentals are Eigen packet ops except sin/cos,
// which go through vsincos.
using ArrayXX = Eigen::ArrayXXd;

inline void activation_batch(Activation a, const Matrix& P, Matrix& V, Matrix* D1, Matrix* D2) {
  const auto Z = P.array();
  switch (a) {
    case Activation::Tanh: {
      // tanh(z) = (e^{2z} - 1) / (e^{2z} + 1); only exp/log have fast
      // double-precision packet paths in this Eigen, so everything is
      // expressed through them.
      ArrayXX E = (2.0 * Z.max(-350.0).min(350.0)).exp();
      V = (E - 1.0) / (E + 1.0);
      if (D1) *D1 = 1.0 - V.array().square();
      if (D2) *D2 = -2.0 * V.array() * D1->array();
      return;
    }
    case Activation::Softplus: {
      ArrayXX E = (-Z.abs()).exp();
      V = Z.max(0.0) + (1.0 + E).log();
      if (D1 || D2) {
        ArrayXX Op1 = 1.0 + E;
        if (D1) *D1 = (Z >= 0.0).select(1.0 / Op1, E / Op1);
        if (D2) *D2 = E / Op1.square();
      }
      return;
    }
    case Activation::Elu: {
      // exp of the clamped argument avoids overflow in the unused branch
      ArrayXX E = Z.min(0.0).exp();
      auto ge = (Z >= 0.0);
      V = ge.select(Z, E - 1.0);
      if (D1) *D1 = ge.select(ArrayXX::Ones(P.rows(), P.cols()), E);
      if (D2) *D2 = ge.select(ArrayXX::Zero(P.rows(), P.cols()), E);
      return;
    }
    case Activation::Sinc: {
      ArrayXX S(P.rows(), P.cols()), C(P.rows(), P.cols());
      vsincos(P.data(), S.data(), C.data(), P.size());
      auto small = Z.abs() < kSincTaylorCut;
      ArrayXX Zs = small.select(ArrayXX::Ones(P.rows(), P.cols()), Z);  // safe divisor
      ArrayXX Z2 = Z.square();
      ArrayXX Vd = S / Zs;
      V = small.select(1.0 - Z2 / 6.0 + Z2.square() / 120.0, Vd);
      if (D1) *D1 = small.select(Z * (-1.0 / 3.0 + Z2 / 30.0), (C - Vd) / Zs);
      if (D2)
        *D2 = small.select(-1.0 / 3.0 + Z2 / 10.0, (2.0 * Vd - 2.0 * C - Z * S) / Zs.square());
      return;
    }
    case Activation::Identity: {
      V = P;
      if (D1) D1->setOnes(P.rows(), P.cols());
      if (D2) D2->setZero(P.rows(), P.cols());
      return;
    }
  }
}

}  // namespace wan
