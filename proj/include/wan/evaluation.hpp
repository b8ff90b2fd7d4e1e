#pragma once

// Error metrics and the fixed evaluation-point protocol: a 100x100 grid over
// the first two coordinates (cell centers, so boundary normals stay
// unambiguous), one random draw of the remaining coordinates per node, kept
// fixed for the whole experiment.

#include "wan/problem.hpp"

#include <cmath>

namespace wan {

struct EvalSet {
  Matrix points;       // M x input_dim
  Vector exact_vals;   // cached u* values when available
  std::uint64_t seed = 0;
  int n1 = 0, n2 = 0;  // grid shape over (x1, x2)
};

/// Fixed evaluation points: cell-centered n1 x n2 grid over the (x1, x2)
/// extent; remaining coordinates (and time) drawn once per node from the
/// dedicated EvalSet stream, redrawn until the point lies inside the domain.
/// For d = 2 cut domains, nodes inside the removed region are dropped.
inline EvalSet build_eval_set(const Domain& dom, std::uint64_t seed, int n1 = 100, int n2 = 100) {
  EvalSet es;
  es.seed = seed;
  es.n1 = n1;
  es.n2 = n2;
  Rng rng(seed, RngStream::EvalSet);
  const int d = dom.dim();
  const int din = dom.input_dim();
  Real lo1 = dom.lo(0), hi1 = dom.hi(0);
  Real lo2 = d > 1 ? dom.lo(1) : 0, hi2 = d > 1 ? dom.hi(1) : 1;
  std::vector<Vector> rows;
  rows.reserve(static_cast<size_t>(n1) * static_cast<size_t>(n2));
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      Vector x(din);
      x(0) = lo1 + (i + 0.5) * (hi1 - lo1) / n1;
      if (d > 1) x(1) = lo2 + (j + 0.5) * (hi2 - lo2) / n2;
      bool ok = true;
      if (d > 2 || dom.time_extended()) {
        ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
          for (int k = 2; k < d; ++k) x(k) = rng.uniform(dom.lo(k), dom.hi(k));
          if (dom.time_extended()) x(d) = rng.uniform(0.0, dom.horizon);
          ok = dom.inside(x.head(d));
        }
      } else {
        ok = dom.inside(x.head(d));
      }
      if (ok) rows.push_back(x);
      if (d == 1) break;  // plain 1-D grid
    }
  }
  es.points.resize(static_cast<Eigen::Index>(rows.size()), din);
  for (size_t k = 0; k < rows.size(); ++k) es.points.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
  return es;
}

inline void cache_exact_values(EvalSet& es, const PdeProblem& p) {
  if (!p.has_exact()) return;
  const int d = p.dim();
  es.exact_vals.resize(es.points.rows());
  for (int k = 0; k < es.points.rows(); ++k) {
    Vector x = es.points.row(k).head(d).transpose();
    Real t = p.parabolic() ? es.points(k, d) : 0.0;
    es.exact_vals(k) = p.exact(x, t);
  }
}

/// ||u_net - u*||_2 / ||u*||_2 over the evaluation set.
inline Real relative_l2_error(const MlpSpec& spec, const ParamVector& params,
                              const PdeProblem& p, const EvalSet& es) {
  if (es.points.rows() == 0) throw ConfigError("relative_l2_error: empty evaluation set");
  Vector exact = es.exact_vals;
  if (exact.size() == 0) {
    EvalSet tmp = es;
    cache_exact_values(tmp, p);
    exact = tmp.exact_vals;
    if (exact.size() == 0) throw ConfigError("relative_l2_error: problem has no exact solution");
  }
  Vector uv;
  net_eval_batch(spec, params, es.points, uv, nullptr);
  Real denom = exact.norm();
  if (denom == 0.0) throw ConfigError("relative_l2_error: reference norm is zero");
  return (uv - exact).norm() / denom;
}

// ---------------------------------------------------------------------------
// 2-D slice export
// ---------------------------------------------------------------------------

struct SliceSpec {
  int axis1 = 0, axis2 = 1;  // the two free coordinates
  Vector fixed;              // full input_dim vector; entries on the free axes ignored
  int resolution = 100;
};

struct SliceGrid {
  int n1 = 0, n2 = 0;
  Real lo1 = 0, hi1 = 0, lo2 = 0, hi2 = 0;
  std::vector<Real> values;      // row-major, [i * n2 + j] with i along axis1
  std::vector<Real> exact_err;   // |u - u*| when available, else empty
  std::vector<unsigned char> mask;  // 1 = inside the domain
};

inline SliceGrid export_slice(const MlpSpec& spec, const ParamVector& params, const PdeProblem& p,
                              const SliceSpec& sl) {
  const Domain& dom = p.domain;
  const int d = dom.dim();
  const int din = dom.input_dim();
  if (sl.fixed.size() != din)
    throw ConfigError("slice: fixed-coordinate vector must have the full input dimension");
  if (sl.axis1 == sl.axis2 || sl.axis1 >= din || sl.axis2 >= din)
    throw ConfigError("slice: invalid axes");
  auto extent = [&](int axis, Real& lo, Real& hi) {
    if (axis < d) {
      lo = dom.lo(axis);
      hi = dom.hi(axis);
    } else {
      lo = 0;
      hi = dom.horizon;
    }
  };
  SliceGrid g;
  g.n1 = g.n2 = sl.resolution;
  extent(sl.axis1, g.lo1, g.hi1);
  extent(sl.axis2, g.lo2, g.hi2);

  Matrix pts(g.n1 * g.n2, din);
  g.mask.assign(static_cast<size_t>(g.n1) * g.n2, 0);
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      Vector x = sl.fixed;
      x(sl.axis1) = g.lo1 + (i + 0.5) * (g.hi1 - g.lo1) / g.n1;
      x(sl.axis2) = g.lo2 + (j + 0.5) * (g.hi2 - g.lo2) / g.n2;
      pts.row(i * g.n2 + j) = x.transpose();
      g.mask[static_cast<size_t>(i) * g.n2 + j] = dom.inside(x.head(d)) ? 1 : 0;
    }
  Vector uv;
  net_eval_batch(spec, params, pts, uv, nullptr);
  g.values.assign(uv.data(), uv.data() + uv.size());
  if (p.has_exact()) {
    g.exact_err.resize(static_cast<size_t>(g.n1) * g.n2);
    for (int k = 0; k < pts.rows(); ++k) {
      Vector x = pts.row(k).head(d).transpose();
      Real t = p.parabolic() ? pts(k, d) : 0.0;
      g.exact_err[static_cast<size_t>(k)] = std::abs(uv(k) - p.exact(x, t));
    }
  }
  return g;
}

}  // namespace wan
