#pragma once

// Geometric domains, uniform interior/boundary/initial samplers, outward
// normals, and the boundary-vanishing weight w (signed distance) used by the
// test-function factorization phi = w * v.

#include "wan/common.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace wan {

enum class DomainKind { Hyperrectangle, BoxMinusBox, TimeProduct };

/// Spatial region, optionally extended with a time interval [0, T].
/// BoxMinusBox removes a corner-anchored box: the removed box shares the
/// outer box's upper corner (cut_hi == hi), the structure of
/// (-1,1)^d \ [0,1)^d.
struct Domain {
  DomainKind kind = DomainKind::Hyperrectangle;
  Vector lo, hi;          // outer spatial box
  Vector cut_lo, cut_hi;  // removed box (BoxMinusBox only)
  Real horizon = 0.0;     // T (TimeProduct only)

  int dim() const { return static_cast<int>(lo.size()); }
  bool time_extended() const { return kind == DomainKind::TimeProduct; }
  /// Network input dimension: d, or d+1 with the time coordinate last.
  int input_dim() const { return dim() + (time_extended() ? 1 : 0); }
  bool has_cut() const { return cut_lo.size() > 0; }

  static Domain hyperrectangle(Vector lo, Vector hi) {
    Domain d;
    d.kind = DomainKind::Hyperrectangle;
    d.lo = std::move(lo);
    d.hi = std::move(hi);
    d.validate();
    return d;
  }

  static Domain box_minus_box(Vector lo, Vector hi, Vector cut_lo, Vector cut_hi) {
    Domain d;
    d.kind = DomainKind::BoxMinusBox;
    d.lo = std::move(lo);
    d.hi = std::move(hi);
    d.cut_lo = std::move(cut_lo);
    d.cut_hi = std::move(cut_hi);
    d.validate();
    return d;
  }

  static Domain time_product(Domain spatial, Real T) {
    if (spatial.time_extended()) throw ConfigError("time_product: spatial domain already has time");
    if (!(T > 0)) throw ConfigError("time_product: horizon T must be positive");
    spatial.kind = DomainKind::TimeProduct;
    spatial.horizon = T;
    return spatial;
  }

  /// The spatial part of a time-extended domain.
  Domain spatial() const {
    Domain d = *this;
    d.kind = has_cut() ? DomainKind::BoxMinusBox : DomainKind::Hyperrectangle;
    d.horizon = 0;
    return d;
  }

  void validate() const {
    if (lo.size() == 0 || lo.size() != hi.size())
      throw ConfigError("domain: lo/hi must be non-empty and of equal length");
    for (int i = 0; i < dim(); ++i)
      if (!(lo(i) < hi(i))) throw ConfigError("domain: requires lo < hi componentwise");
    if (has_cut()) {
      if (cut_lo.size() != lo.size() || cut_hi.size() != lo.size())
        throw ConfigError("domain: removed box dimension mismatch");
      for (int i = 0; i < dim(); ++i) {
        if (!(cut_lo(i) > lo(i) && cut_lo(i) < hi(i)))
          throw ConfigError("domain: removed box corner must lie strictly inside the outer box");
        if (cut_hi(i) != hi(i))
          throw ConfigError("domain: removed box must share the outer box's upper corner");
      }
    }
  }

  Real volume() const {
    Real v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi(i) - lo(i);
    if (has_cut()) {
      Real c = 1.0;
      for (int i = 0; i < dim(); ++i) c *= cut_hi(i) - cut_lo(i);
      v -= c;
    }
    return v;
  }

  /// Interior measure of the collocation region (|Omega| or |Omega| * T).
  Real interior_measure() const { return volume() * (time_extended() ? horizon : 1.0); }

  // Spatial boundary faces. Order: low faces (x_i = lo_i), high faces
  // (x_i = hi_i), then cutout faces (x_i = cut_lo_i).
  int face_count() const { return has_cut() ? 3 * dim() : 2 * dim(); }

  bool in_removed_closure(const Vector& x) const {
    if (!has_cut()) return false;
    for (int i = 0; i < dim(); ++i)
      if (x(i) < cut_lo(i)) return false;
    return true;
  }

  /// Strict spatial interior.
  bool inside(const Vector& x) const {
    for (int i = 0; i < dim(); ++i)
      if (!(x(i) > lo(i) && x(i) < hi(i))) return false;
    return !in_removed_closure(x);
  }

  /// Closure membership (spatial part).
  bool inside_closure(const Vector& x) const {
    for (int i = 0; i < dim(); ++i)
      if (x(i) < lo(i) || x(i) > hi(i)) return false;
    if (!has_cut()) return true;
    bool strictly_removed = true;
    for (int i = 0; i < dim(); ++i)
      if (x(i) <= cut_lo(i)) strictly_removed = false;
    return !strictly_removed;
  }
};

// ---------------------------------------------------------------------------
// Boundary weight w: distance to the spatial boundary, positive inside,
// exactly zero on it, 1-Lipschitz. For time-extended domains w depends on the
// spatial coordinates only.
// ---------------------------------------------------------------------------

namespace detail {

inline Real box_face_distance(const Domain& d, const Vector& x, int* face = nullptr) {
  Real best = std::numeric_limits<Real>::infinity();
  int best_face = -1;
  for (int i = 0; i < d.dim(); ++i) {
    Real lo_dist = x(i) - d.lo(i);
    if (lo_dist < best) best = lo_dist, best_face = 2 * i;
    Real hi_dist = d.hi(i) - x(i);
    if (hi_dist < best) best = hi_dist, best_face = 2 * i + 1;
  }
  if (face) *face = best_face;
  return best;
}

/// Euclidean distance from x to the removed box; zero inside it. `diff`
/// receives x minus its projection onto the box.
inline Real cut_box_distance(const Domain& d, const Vector& x, Vector* diff = nullptr) {
  Real sum = 0;
  for (int i = 0; i < d.dim(); ++i) {
    Real p = std::clamp(x(i), d.cut_lo(i), d.cut_hi(i));
    Real e = x(i) - p;
    sum += e * e;
    if (diff) (*diff)(i) = e;
  }
  return std::sqrt(sum);
}

}  // namespace detail

/// w(x): distance to the spatial boundary (positive inside, 0 on it).
inline Real boundary_weight(const Domain& dom, const Vector& x_full) {
  Vector x = dom.time_extended() ? Vector(x_full.head(dom.dim())) : x_full;
  Real w = detail::box_face_distance(dom, x);
  if (dom.has_cut()) w = std::min(w, detail::cut_box_distance(dom, x));
  return w;
}

/// Gradient of w where defined; on the measure-zero ridge set the face with
/// the lowest index wins. Time component (if any) is zero.
inline Vector boundary_weight_gradient(const Domain& dom, const Vector& x_full) {
  Vector x = dom.time_extended() ? Vector(x_full.head(dom.dim())) : x_full;
  Vector g = Vector::Zero(x_full.size());
  int face = -1;
  Real wbox = detail::box_face_distance(dom, x, &face);
  Real wcut = std::numeric_limits<Real>::infinity();
  Vector diff;
  if (dom.has_cut()) {
    diff.resize(dom.dim());
    wcut = detail::cut_box_distance(dom, x, &diff);
  }
  if (wbox <= wcut) {
    int i = face / 2;
    g(i) = face % 2 == 0 ? 1.0 : -1.0;  // d/dx of (x_i - lo_i) resp. (hi_i - x_i)
  } else {
    Real norm = std::max(wcut, 1e-300);
    for (int i = 0; i < dom.dim(); ++i) g(i) = diff(i) / norm;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Samplers
// ---------------------------------------------------------------------------

/// Sampled interior/boundary/initial points with normals and the measure
/// metadata the Monte Carlo estimators need. Row layout: one point per row;
/// time-extended domains carry t as the last column.
struct CollocationBatch {
  Matrix interior;   // N_r x input_dim
  Matrix boundary;   // N_b x input_dim
  Matrix normals;    // N_b x input_dim (unit spatial normal, 0 time part)
  Matrix initial;    // N_a x input_dim (t = 0); empty for static domains
  Real volume = 0;   // spatial |Omega|
  Real boundary_measure = 0;
  Real horizon = 0;  // T, 0 for static
  std::uint64_t seed = 0;

  int n_interior() const { return static_cast<int>(interior.rows()); }
  int n_boundary() const { return static_cast<int>(boundary.rows()); }
  int n_initial() const { return static_cast<int>(initial.rows()); }
};



namespace detail {

inline Vector sample_spatial_interior(const Domain& d, Rng& rng) {
  Vector x(d.dim());
  for (int attempt = 0; attempt < 10000; ++attempt) {
    for (int i = 0; i < d.dim(); ++i) x(i) = rng.uniform(d.lo(i), d.hi(i));
    if (!d.in_removed_closure(x)) return x;
  }
  throw Error("interior rejection sampling failed (degenerate domain?)");
}

inline Real face_measure(const Domain& d, int f) {
  Real m = 1.0;
  int axis = f < 2 * d.dim() ? f / 2 : f - 2 * d.dim();
  if (f < 2 * d.dim()) {
    bool high = f % 2 == 1;
    for (int j = 0; j < d.dim(); ++j) {
      if (j == axis) continue;
      m *= d.hi(j) - d.lo(j);
    }
    if (d.has_cut() && high) {
      Real c = 1.0;
      for (int j = 0; j < d.dim(); ++j) {
        if (j == axis) continue;
        c *= d.cut_hi(j) - d.cut_lo(j);
      }
      m -= c;  // the part swallowed by the removed box
    }
    if (d.has_cut() && !high) {
      // low faces are full
    }
  } else {
    for (int j = 0; j < d.dim(); ++j) {
      if (j == axis) continue;
      m *= d.cut_hi(j) - d.cut_lo(j);
    }
  }
  return m;
}

/// One point uniform on spatial face f, with its outward unit normal.
inline void sample_on_face(const Domain& d, int f, Rng& rng, Vector& x, Vector& normal) {
  x.resize(d.dim());
  normal = Vector::Zero(d.dim());
  if (f < 2 * d.dim()) {
    int axis = f / 2;
    bool high = f % 2 == 1;
    for (int attempt = 0; attempt < 10000; ++attempt) {
      for (int j = 0; j < d.dim(); ++j) x(j) = rng.uniform(d.lo(j), d.hi(j));
      x(axis) = high ? d.hi(axis) : d.lo(axis);
      if (!d.has_cut() || !high) break;
      // on a truncated high face, reject points swallowed by the removed box
      bool removed = true;
      for (int j = 0; j < d.dim(); ++j)
        if (j != axis && x(j) < d.cut_lo(j)) removed = false;
      if (!removed) break;
      if (attempt == 9999) throw Error("boundary rejection sampling failed");
    }
    normal(axis) = high ? 1.0 : -1.0;
  } else {
    // cutout face: points toward the removed box interior
    int axis = f - 2 * d.dim();
    for (int j = 0; j < d.dim(); ++j) x(j) = rng.uniform(d.cut_lo(j), d.cut_hi(j));
    x(axis) = d.cut_lo(axis);
    normal(axis) = 1.0;
  }
}

}  // namespace detail

/// N i.i.d. uniform interior points (time column included when present).
inline Matrix sample_interior(const Domain& d, int n, Rng& rng) {
  if (n < 1) throw ConfigError("sample_interior: need at least one point");
  Matrix X(n, d.input_dim());
  for (int k = 0; k < n; ++k) {
    Vector x = detail::sample_spatial_interior(d, rng);
    X.row(k).head(d.dim()) = x.transpose();
    if (d.time_extended()) X(k, d.dim()) = rng.uniform(0.0, d.horizon);
  }
  return X;
}

/// Boundary points with unit outward normals, equal counts per face.
/// n must be divisible by the face count.
inline void sample_boundary(const Domain& d, int n, Rng& rng, Matrix& points, Matrix& normals) {
  int faces = d.face_count();
  if (n % faces != 0)
    throw ConfigError("boundary point count " + std::to_string(n) +
                      " is not divisible by the face count " + std::to_string(faces));
  int per_face = n / faces;
  points.resize(n, d.input_dim());
  normals.setZero(n, d.input_dim());
  Vector x, nv;
  int k = 0;
  for (int f = 0; f < faces; ++f) {
    for (int j = 0; j < per_face; ++j, ++k) {
      detail::sample_on_face(d, f, rng, x, nv);
      points.row(k).head(d.dim()) = x.transpose();
      normals.row(k).head(d.dim()) = nv.transpose();
      if (d.time_extended()) points(k, d.dim()) = rng.uniform(0.0, d.horizon);
    }
  }
}

/// Initial-slice points: uniform in the spatial domain at t = 0 exactly.
inline Matrix sample_initial(const Domain& d, int n, Rng& rng) {
  if (!d.time_extended()) throw ConfigError("sample_initial: domain is not time-extended");
  Matrix X(n, d.input_dim());
  for (int k = 0; k < n; ++k) {
    Vector x = detail::sample_spatial_interior(d, rng);
    X.row(k).head(d.dim()) = x.transpose();
    X(k, d.dim()) = 0.0;
  }
  return X;
}

/// Full collocation batch from independent per-purpose streams, so changing
/// one count does not perturb the other samples.
inline CollocationBatch make_batch(const Domain& d, int n_r, int n_b, int n_a,
                                   std::uint64_t seed) {
  CollocationBatch b;
  b.seed = seed;
  b.volume = d.volume();
  b.horizon = d.time_extended() ? d.horizon : 0.0;
  Real bm = 0;
  for (int f = 0; f < d.face_count(); ++f) bm += detail::face_measure(d, f);
  b.boundary_measure = bm;
  Rng ri(seed, RngStream::Interior);
  b.interior = sample_interior(d, n_r, ri);
  if (n_b > 0) {
    Rng rb(seed, RngStream::Boundary);
    sample_boundary(d, n_b, rb, b.boundary, b.normals);
  } else {
    b.boundary.resize(0, d.input_dim());
    b.normals.resize(0, d.input_dim());
  }
  if (d.time_extended() && n_a > 0) {
    Rng ra(seed, RngStream::Initial);
    b.initial = sample_initial(d, n_a, ra);
  } else {
    b.initial.resize(0, d.input_dim());
  }
  return b;
}

}  // namespace wan
