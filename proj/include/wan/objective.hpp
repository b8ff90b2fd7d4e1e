#pragma once

// Monte Carlo estimators of the weak pairing <A[u], phi> and the losses
// L_int (log and direct), L_bdry (Dirichlet/Neumann, squared/absolute) and
// L_init, plus the composed objectives used by the alternating training.
// The test function is factorized phi = w * v with w vanishing on the
// spatial boundary, so phi satisfies its boundary constraint exactly.
//
// Everything exists twice: as tape expressions (for parameter gradients) and
// as plain array arithmetic (for logging and Monte Carlo statistics); a unit
// test pins the two paths against each other.

#include "wan/library.hpp"
#include "wan/tape.hpp"

namespace wan {

enum class IntForm { Log, Direct };
enum class BdryForm { Squared, Absolute };

inline const char* to_string(IntForm f) { return f == IntForm::Log ? "log" : "direct"; }
inline const char* to_string(BdryForm f) { return f == BdryForm::Squared ? "squared" : "absolute"; }

/// |<A,phi>|^2 is floored here before the log to survive transient zero
/// crossings of the pairing estimate.
inline constexpr Real kLogPairingFloor = 1e-30;

struct LossForms {
  IntForm u_form = IntForm::Direct;     // theta updates
  IntForm eta_form = IntForm::Log;      // eta updates and reporting
  BdryForm bdry_form = BdryForm::Squared;
};

struct LossBreakdown {
  Real pairing = 0;       // <A[u], phi> estimate
  Real test_norm_sq = 0;  // ||phi||_2^2 estimate
  Real L_int = 0;
  Real L_bdry = 0;
  Real L_init = 0;
  Real total = 0;
};

// ---------------------------------------------------------------------------
// Test-function weight
// ---------------------------------------------------------------------------

/// w and grad w evaluated on a point set (rows; full input coordinates).
struct TestWeight {
  std::function<void(const Matrix& pts, Vector& w, Matrix& gw)> eval;
};

inline TestWeight analytic_weight(const Domain& dom) {
  TestWeight tw;
  Domain d = dom;
  tw.eval = [d](const Matrix& pts, Vector& w, Matrix& gw) {
    int n = static_cast<int>(pts.rows());
    w.resize(n);
    gw.resize(n, pts.cols());
    for (int k = 0; k < n; ++k) {
      Vector x = pts.row(k).transpose();
      w(k) = boundary_weight(d, x);
      gw.row(k) = boundary_weight_gradient(d, x).transpose();
    }
  };
  return tw;
}

/// Pre-trained network weight with a softplus-positive output head.
inline TestWeight network_weight(MlpSpec spec, ParamVector params) {
  TestWeight tw;
  auto sp = std::make_shared<MlpSpec>(std::move(spec));
  auto pp = std::make_shared<ParamVector>(std::move(params));
  tw.eval = [sp, pp](const Matrix& pts, Vector& w, Matrix& gw) {
    Vector raw;
    Matrix graw;
    net_eval_batch(*sp, *pp, pts, raw, &graw);
    int n = static_cast<int>(pts.rows());
    w.resize(n);
    gw.resize(n, pts.cols());
    for (int k = 0; k < n; ++k) {
      w(k) = activation_value(Activation::Softplus, raw(k));
      gw.row(k) = activation_derivative(Activation::Softplus, raw(k)) * graw.row(k);
    }
  };
  return tw;
}

/// Test function phi = w * v: boundary-vanishing weight times an inner net.
struct TestFunction {
  MlpSpec spec;
  ParamVector params;
  TestWeight weight;
};

inline TestFunction make_test_function(const Domain& dom, MlpSpec spec, ParamVector params) {
  return TestFunction{std::move(spec), std::move(params), analytic_weight(dom)};
}

// ---------------------------------------------------------------------------
// Per-batch coefficient cache (pure functions of problem and points)
// ---------------------------------------------------------------------------

struct BatchCoefficients {
  bool isotropic = true;
  Vector a_scalar;               // interior, isotropic path
  std::vector<Vector> a_entry;   // interior, matrix path, row-major d*d
  Matrix b_vals;                 // interior, N x d (cols per drift component)
  Vector c_vals;
  Vector f_vals;
  Vector w_vals;                 // weight on interior points
  Matrix w_grads;                // N x input_dim (time column zero)
  Vector g_vals;                 // boundary data at boundary points
  Vector h_vals;                 // initial data at initial points (space-time)
  Vector w_at_initial;           // weight at the initial/terminal spatial points
  Matrix pts_T;                  // initial points moved to t = T
};

inline BatchCoefficients build_coefficients(const PdeProblem& p, const CollocationBatch& batch,
                                            const TestWeight& weight) {
  if (batch.n_interior() == 0) throw ConfigError("empty interior batch");
  BatchCoefficients co;
  const int n = batch.n_interior();
  const int d = p.dim();
  const bool st = p.parabolic();
  auto xt = [&](const Matrix& pts, int k, Vector& x) -> Real {
    x = pts.row(k).head(d).transpose();
    return st ? pts(k, d) : 0.0;
  };

  co.isotropic = !p.a || p.a.isotropic();
  Vector x;
  if (p.a) {
    if (co.isotropic) {
      co.a_scalar.resize(n);
      for (int k = 0; k < n; ++k) {
        Real t = xt(batch.interior, k, x);
        co.a_scalar(k) = p.a.scalar(x, t);
      }
    } else {
      if (d > 8) throw ConfigError("matrix diffusion is supported for d <= 8");
      co.a_entry.assign(static_cast<size_t>(d * d), Vector(n));
      for (int k = 0; k < n; ++k) {
        Real t = xt(batch.interior, k, x);
        Matrix A = p.a.matrix(x, t);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) co.a_entry[static_cast<size_t>(i * d + j)](k) = A(i, j);
      }
    }
  }
  if (p.b) {
    co.b_vals.resize(n, d);
    for (int k = 0; k < n; ++k) {
      Real t = xt(batch.interior, k, x);
      co.b_vals.row(k) = p.b(x, t).transpose();
    }
  }
  if (p.c) {
    co.c_vals.resize(n);
    for (int k = 0; k < n; ++k) {
      Real t = xt(batch.interior, k, x);
      co.c_vals(k) = p.c(x, t);
    }
  }
  if (p.f) {
    co.f_vals.resize(n);
    for (int k = 0; k < n; ++k) {
      Real t = xt(batch.interior, k, x);
      co.f_vals(k) = p.f(x, t);
    }
  }
  weight.eval(batch.interior, co.w_vals, co.w_grads);

  if (batch.n_boundary() > 0) {
    co.g_vals.resize(batch.n_boundary());
    for (int k = 0; k < batch.n_boundary(); ++k) {
      Vector xb = batch.boundary.row(k).head(d).transpose();
      Vector nb = batch.normals.row(k).head(d).transpose();
      Real t = st ? batch.boundary(k, d) : 0.0;
      co.g_vals(k) = p.g(xb, nb, t);
    }
  }
  if (st && batch.n_initial() > 0) {
    co.h_vals.resize(batch.n_initial());
    for (int k = 0; k < batch.n_initial(); ++k) {
      Vector xa = batch.initial.row(k).head(d).transpose();
      co.h_vals(k) = p.h ? p.h(xa, 0.0) : 0.0;
    }
    Matrix gw_unused;
    weight.eval(batch.initial, co.w_at_initial, gw_unused);
    co.pts_T = batch.initial;
    co.pts_T.col(d).setConstant(batch.horizon);
  }
  return co;
}

// ---------------------------------------------------------------------------
// Tape-side assembly
// ---------------------------------------------------------------------------

/// Solution-network quantities entering the losses, as tape variables.
struct UOutputs {
  Bv value;                  // interior values
  std::vector<Bv> grad;      // interior input-gradient components (d, or d+1)
  Bv bdry_value;             // boundary values (Dirichlet)
  std::vector<Bv> bdry_grad; // boundary gradients (Neumann)
  Bv init_value;             // u(x_a, 0)
  Bv term_value;             // u(x_a, T)
};

/// Composed test-function quantities (phi = w * v).
struct PhiOutputs {
  Bv value;
  std::vector<Bv> grad;      // spatial components then (space-time) time slot
  Bv value_T, value_0;       // phi(x_a, T), phi(x_a, 0)
};

namespace obj_detail {

inline std::vector<Bv> compose_phi_grad(Tape& t, const NetOut& v, Bv w, const Matrix& w_grads,
                                        Bv phi_value_src_v) {
  // d_i phi = (d_i w) v + w (d_i v); time column of w_grads is zero
  std::vector<Bv> out;
  out.reserve(v.grad.size());
  for (size_t j = 0; j < v.grad.size(); ++j) {
    Bv term = t.mul(w, v.grad[j]);
    Bv gwj = t.constant(Vector(w_grads.col(static_cast<Eigen::Index>(j))));
    term = t.add(term, t.mul(gwj, phi_value_src_v));
    out.push_back(term);
  }
  return out;
}

}  // namespace obj_detail

/// Evaluates the solution network on every point set a problem needs.
inline UOutputs eval_u_on_tape(Tape& t, int u_slot, const PdeProblem& p,
                               const CollocationBatch& batch, const BatchCoefficients& co) {
  UOutputs u;
  NetOut interior = t.net_eval(u_slot, batch.interior, true);
  u.value = interior.value;
  u.grad = interior.grad;
  if (batch.n_boundary() > 0) {
    bool need_grad = p.bc == BoundaryKind::Neumann;
    NetOut bd = t.net_eval(u_slot, batch.boundary, need_grad);
    u.bdry_value = bd.value;
    u.bdry_grad = bd.grad;
  }
  if (p.parabolic() && batch.n_initial() > 0) {
    u.init_value = t.net_eval(u_slot, batch.initial, false).value;
    u.term_value = t.net_eval(u_slot, co.pts_T, false).value;
  }
  return u;
}

/// Evaluates the inner test net and composes phi = w * v.
inline PhiOutputs eval_phi_on_tape(Tape& t, int v_slot, const PdeProblem& p,
                                   const CollocationBatch& batch, const BatchCoefficients& co) {
  PhiOutputs phi;
  NetOut v = t.net_eval(v_slot, batch.interior, true);
  Bv w = t.constant(co.w_vals);
  phi.value = t.mul(w, v.value);
  phi.grad = obj_detail::compose_phi_grad(t, v, w, co.w_grads, v.value);
  if (p.parabolic() && batch.n_initial() > 0) {
    Bv wa = t.constant(co.w_at_initial);
    phi.value_T = t.mul(wa, t.net_eval(v_slot, co.pts_T, false).value);
    phi.value_0 = t.mul(wa, t.net_eval(v_slot, batch.initial, false).value);
  }
  return phi;
}

/// Re-creates UOutputs from precomputed arrays (frozen solution network).
struct CachedU {
  Vector value;
  Matrix grads;
  Vector term_value;  // u(x_a, T), space-time only
};

inline UOutputs u_outputs_from_cache(Tape& t, const CachedU& c) {
  UOutputs u;
  u.value = t.constant(c.value);
  for (int j = 0; j < c.grads.cols(); ++j) u.grad.push_back(t.constant(Vector(c.grads.col(j))));
  if (c.term_value.size()) u.term_value = t.constant(c.term_value);
  return u;
}

/// Precomputed phi arrays (frozen test function).
struct CachedPhi {
  Vector value;
  Matrix grads;
  Vector value_T, value_0;
};

inline PhiOutputs phi_outputs_from_cache(Tape& t, const CachedPhi& c) {
  PhiOutputs phi;
  phi.value = t.constant(c.value);
  for (int j = 0; j < c.grads.cols(); ++j) phi.grad.push_back(t.constant(Vector(c.grads.col(j))));
  if (c.value_T.size()) {
    phi.value_T = t.constant(c.value_T);
    phi.value_0 = t.constant(c.value_0);
  }
  return phi;
}

/// Per-point weak integrand I as a tape vector over the interior batch
/// (spatial part only; time-derivative and terminal terms are separate).
inline Bv integrand_on_tape(Tape& t, const PdeProblem& p, const BatchCoefficients& co,
                            const UOutputs& u, const PhiOutputs& phi) {
  const int d = p.dim();
  const int n = static_cast<int>(t.vec(u.value).size());
  Bv I = t.constant(Vector(Vector::Zero(n)));
  if (p.a) {
    if (co.isotropic) {
      Bv dot = t.mul(u.grad[0], phi.grad[0]);
      for (int j = 1; j < d; ++j) dot = t.add(dot, t.mul(u.grad[static_cast<size_t>(j)], phi.grad[static_cast<size_t>(j)]));
      I = t.add(I, t.mul(t.constant(co.a_scalar), dot));
    } else {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          Bv term = t.mul(u.grad[static_cast<size_t>(j)], phi.grad[static_cast<size_t>(i)]);
          I = t.add(I, t.mul(t.constant(co.a_entry[static_cast<size_t>(i * d + j)]), term));
        }
    }
  }
  if (p.b) {
    Bv bdot = t.mul(t.constant(Vector(co.b_vals.col(0))), u.grad[0]);
    for (int j = 1; j < d; ++j)
      bdot = t.add(bdot, t.mul(t.constant(Vector(co.b_vals.col(j))), u.grad[static_cast<size_t>(j)]));
    I = t.add(I, t.mul(phi.value, bdot));
  }
  if (p.c) I = t.add(I, t.mul(t.constant(co.c_vals), t.mul(u.value, phi.value)));
  if (p.nonlinear) {
    std::vector<Bv> args;
    args.push_back(u.value);
    for (int j = 0; j < d; ++j) args.push_back(u.grad[static_cast<size_t>(j)]);
    Nonlinearity nl = p.nonlinear;
    PointwiseFn fn;
    fn.value = [nl, d](const Real* a) {
      Eigen::Map<const Vector> g(a + 1, d);
      return nl.value(a[0], g);
    };
    fn.partials = [nl, d](const Real* a, Real* out) {
      Eigen::Map<const Vector> g(a + 1, d);
      out[0] = nl.du(a[0], g);
      Vector dg = nl.dgrad(a[0], g);
      for (int j = 0; j < d; ++j) out[j + 1] = dg(j);
    };
    I = t.add(I, t.mul(t.pointwise(args, std::move(fn)), phi.value));
  }
  if (co.f_vals.size()) I = t.sub(I, t.mul(t.constant(co.f_vals), phi.value));
  return I;
}

/// <A[u], phi> estimate. Static problems: (|Omega|/N_r) sum I. Space-time:
/// terminal + time-derivative + spatial terms with their region measures.
inline Sc pairing_on_tape(Tape& t, const PdeProblem& p, const CollocationBatch& batch,
                          const BatchCoefficients& co, const UOutputs& u, const PhiOutputs& phi) {
  Bv I = integrand_on_tape(t, p, co, u, phi);
  if (!p.parabolic()) return t.scale(t.sum(I), batch.volume / batch.n_interior());

  // spatial + time-derivative terms over Omega x [0, T]
  const int d = p.dim();
  Bv ut_term = t.mul(u.value, phi.grad[static_cast<size_t>(d)]);
  Sc spacetime = t.scale(t.sub(t.sum(I), t.sum(ut_term)),
                         batch.volume * batch.horizon / batch.n_interior());
  // terminal term over Omega: u(x,T) phi(x,T) - h(x) phi(x,0)
  if (batch.n_initial() == 0) throw ConfigError("space-time pairing needs initial points");
  Bv term = t.sub(t.mul(u.term_value, phi.value_T), t.mul(t.constant(co.h_vals), phi.value_0));
  Sc terminal = t.scale(t.sum(term), batch.volume / batch.n_initial());
  return t.add(terminal, spacetime);
}

/// ||phi||_2^2 estimate over the interior sample.
inline Sc test_norm_on_tape(Tape& t, const PdeProblem& p, const CollocationBatch& batch,
                            const PhiOutputs& phi) {
  Real measure = p.parabolic() ? batch.volume * batch.horizon : batch.volume;
  return t.scale(t.sum(t.square(phi.value)), measure / batch.n_interior());
}

inline Sc loss_int_on_tape(Tape& t, Sc pairing, Sc norm_sq, IntForm form) {
  if (!(t.sval(norm_sq) > 0.0))
    throw DegenerateTestFunctionError("test-function norm estimate is zero (v collapsed?)");
  if (form == IntForm::Log)
    return t.sub(t.log(t.clamp_min(t.square(pairing), kLogPairingFloor), "pairing"),
                 t.log(norm_sq, "test_norm"));
  return t.div(t.square(pairing), norm_sq);
}

/// Boundary loss: mean of squared or absolute mismatch. Dirichlet compares
/// u with g; Neumann compares n . grad u with g.
inline Sc loss_bdry_on_tape(Tape& t, const PdeProblem& p, const CollocationBatch& batch,
                            const BatchCoefficients& co, const UOutputs& u, BdryForm form) {
  if (batch.n_boundary() == 0) throw ConfigError("boundary loss needs boundary points");
  Bv mismatch;
  if (p.bc == BoundaryKind::Dirichlet) {
    mismatch = t.sub(u.bdry_value, t.constant(co.g_vals));
  } else {
    if (batch.normals.rows() != batch.boundary.rows() || u.bdry_grad.empty())
      throw ConfigError("Neumann boundary loss needs normals and boundary gradients");
    Bv flux = t.mul(t.constant(Vector(batch.normals.col(0))), u.bdry_grad[0]);
    for (int j = 1; j < p.dim(); ++j)
      flux = t.add(flux, t.mul(t.constant(Vector(batch.normals.col(j))),
                               u.bdry_grad[static_cast<size_t>(j)]));
    mismatch = t.sub(flux, t.constant(co.g_vals));
  }
  Bv e = form == BdryForm::Squared ? t.square(mismatch) : t.abs(mismatch);
  return t.mean(e);
}

inline Sc loss_init_on_tape(Tape& t, const PdeProblem& p, const CollocationBatch& batch,
                            const BatchCoefficients& co, const UOutputs& u) {
  if (!p.parabolic()) throw ConfigError("initial loss only applies to parabolic problems");
  if (batch.n_initial() == 0) throw ConfigError("initial loss needs initial points");
  return t.mean(t.square(t.sub(u.init_value, t.constant(co.h_vals))));
}

// ---------------------------------------------------------------------------
// Composed objectives
// ---------------------------------------------------------------------------

struct ObjectiveContext {
  const PdeProblem* problem = nullptr;
  const CollocationBatch* batch = nullptr;
  BatchCoefficients coeffs;
  LossForms forms;
  Real alpha = 1.0;
  Real gamma = 0.0;
};

inline ObjectiveContext make_context(const PdeProblem& p, const CollocationBatch& batch,
                                     const TestWeight& weight, LossForms forms, Real alpha,
                                     Real gamma) {
  if (!(alpha > 0)) throw ConfigError("alpha must be positive");
  if (p.parabolic() && !(gamma > 0)) throw ConfigError("gamma must be positive for parabolic problems");
  ObjectiveContext ctx;
  ctx.problem = &p;
  ctx.batch = &batch;
  ctx.coeffs = build_coefficients(p, batch, weight);
  ctx.forms = forms;
  ctx.alpha = alpha;
  ctx.gamma = gamma;
  return ctx;
}

/// L = L_int + alpha L_bdry (+ gamma L_init), the descent objective for theta.
inline Sc total_loss_on_tape(Tape& t, const ObjectiveContext& ctx, const UOutputs& u,
                             const PhiOutputs& phi, LossBreakdown* out) {
  const PdeProblem& p = *ctx.problem;
  Sc pairing = pairing_on_tape(t, p, *ctx.batch, ctx.coeffs, u, phi);
  Sc norm_sq = test_norm_on_tape(t, p, *ctx.batch, phi);
  Sc lint = loss_int_on_tape(t, pairing, norm_sq, ctx.forms.u_form);
  Sc total = lint;
  Sc lbdry = t.constant(0.0);
  if (ctx.batch->n_boundary() > 0) {
    lbdry = loss_bdry_on_tape(t, p, *ctx.batch, ctx.coeffs, u, ctx.forms.bdry_form);
    total = t.add(total, t.scale(lbdry, ctx.alpha));
  }
  Sc linit = t.constant(0.0);
  if (p.parabolic()) {
    linit = loss_init_on_tape(t, p, *ctx.batch, ctx.coeffs, u);
    total = t.add(total, t.scale(linit, ctx.gamma));
  }
  if (out) {
    out->pairing = t.sval(pairing);
    out->test_norm_sq = t.sval(norm_sq);
    out->L_int = t.sval(lint);
    out->L_bdry = t.sval(lbdry);
    out->L_init = t.sval(linit);
    out->total = t.sval(total);
  }
  return total;
}

/// The eta-ascent objective: L_int only (boundary and initial terms carry no
/// eta dependence).
inline Sc eta_loss_on_tape(Tape& t, const ObjectiveContext& ctx, const UOutputs& u,
                           const PhiOutputs& phi, LossBreakdown* out) {
  const PdeProblem& p = *ctx.problem;
  Sc pairing = pairing_on_tape(t, p, *ctx.batch, ctx.coeffs, u, phi);
  Sc norm_sq = test_norm_on_tape(t, p, *ctx.batch, phi);
  Sc lint = loss_int_on_tape(t, pairing, norm_sq, ctx.forms.eta_form);
  if (out) {
    out->pairing = t.sval(pairing);
    out->test_norm_sq = t.sval(norm_sq);
    out->L_int = t.sval(lint);
    out->total = t.sval(lint);
  }
  return lint;
}

// ---------------------------------------------------------------------------
// Numeric wrappers (no gradients): spec-level operations and statistics
// ---------------------------------------------------------------------------

/// (value, spatial-grad [, time-grad]) arrays for a point set.
struct PointSetEval {
  Vector values;
  Matrix grads;  // n x input_dim; may be empty when not needed
};

inline PointSetEval eval_net_on(const MlpSpec& spec, const ParamVector& params, const Matrix& pts,
                                bool need_grads) {
  PointSetEval e;
  net_eval_batch(spec, params, pts, e.values, need_grads ? &e.grads : nullptr);
  return e;
}

/// Exact-solution closure evaluated like a network (for Theorem-1 style tests).
inline PointSetEval eval_exact_on(const PdeProblem& p, const Matrix& pts, bool need_grads) {
  PointSetEval e;
  const int n = static_cast<int>(pts.rows());
  const int d = p.dim();
  e.values.resize(n);
  if (need_grads) e.grads.resize(n, pts.cols());
  for (int k = 0; k < n; ++k) {
    Vector x = pts.row(k).head(d).transpose();
    Real t = p.parabolic() ? pts(k, d) : 0.0;
    e.values(k) = p.exact(x, t);
    if (need_grads) {
      e.grads.row(k).head(d) = p.exact_grad(x, t).transpose();
      if (p.parabolic()) e.grads(k, d) = p.exact_dt(x, t);
    }
  }
  return e;
}

inline PointSetEval compose_phi(const PointSetEval& v, const Vector& w, const Matrix& gw) {
  PointSetEval phi;
  phi.values = w.array() * v.values.array();
  if (v.grads.size()) {
    phi.grads.resize(v.grads.rows(), v.grads.cols());
    for (int j = 0; j < v.grads.cols(); ++j)
      phi.grads.col(j) =
          w.array() * v.grads.col(j).array() + gw.col(j).array() * v.values.array();
  }
  return phi;
}

/// Per-point integrand values over the interior batch (numeric twin of
/// integrand_on_tape, plus the space-time -u dphi/dt term when applicable).
inline Vector integrand_values(const PdeProblem& p, const CollocationBatch& batch,
                               const BatchCoefficients& co, const PointSetEval& u,
                               const PointSetEval& phi) {
  const int n = batch.n_interior();
  const int d = p.dim();
  Vector I = Vector::Zero(n);
  if (p.a) {
    if (co.isotropic) {
      Vector dot = Vector::Zero(n);
      for (int j = 0; j < d; ++j) dot.array() += u.grads.col(j).array() * phi.grads.col(j).array();
      I.array() += co.a_scalar.array() * dot.array();
    } else {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          I.array() += co.a_entry[static_cast<size_t>(i * d + j)].array() *
                       u.grads.col(j).array() * phi.grads.col(i).array();
    }
  }
  if (p.b) {
    Vector bdot = Vector::Zero(n);
    for (int j = 0; j < d; ++j) bdot.array() += co.b_vals.col(j).array() * u.grads.col(j).array();
    I.array() += phi.values.array() * bdot.array();
  }
  if (p.c) I.array() += co.c_vals.array() * u.values.array() * phi.values.array();
  if (p.nonlinear) {
    for (int k = 0; k < n; ++k)
      I(k) += p.nonlinear.value(u.values(k), u.grads.row(k).head(d).transpose()) * phi.values(k);
  }
  if (co.f_vals.size()) I.array() -= co.f_vals.array() * phi.values.array();
  if (p.parabolic()) I.array() -= u.values.array() * phi.grads.col(d).array();
  return I;
}

struct PairingStats {
  Real estimate = 0;
  Real std_error = 0;
};

/// Monte Carlo pairing estimate with its standard error. `u_*` evaluate the
/// candidate solution, `v_*` the inner test network.
inline PairingStats pairing_stats(const PdeProblem& p, const CollocationBatch& batch,
                                  const BatchCoefficients& co, const PointSetEval& u_interior,
                                  const PointSetEval& phi_interior, const Vector& u_at_T,
                                  const Vector& phi_at_T, const Vector& phi_at_0) {
  PairingStats out;
  const int n = batch.n_interior();
  Vector I = integrand_values(p, batch, co, u_interior, phi_interior);
  Real measure = p.parabolic() ? batch.volume * batch.horizon : batch.volume;
  Real mean = I.mean();
  Real var = n > 1 ? (I.array() - mean).square().sum() / (n - 1) : 0.0;
  out.estimate = measure * mean;
  Real se_sq = measure * measure * var / n;
  if (p.parabolic()) {
    const int m = batch.n_initial();
    Vector term = u_at_T.array() * phi_at_T.array() - co.h_vals.array() * phi_at_0.array();
    Real tmean = term.mean();
    Real tvar = m > 1 ? (term.array() - tmean).square().sum() / (m - 1) : 0.0;
    out.estimate += batch.volume * tmean;
    se_sq += batch.volume * batch.volume * tvar / m;
  }
  out.std_error = std::sqrt(se_sq);
  return out;
}

/// Spec-level convenience: pairing estimate for a solution network.
inline Real estimate_pairing(const PdeProblem& p, const CollocationBatch& batch,
                             const MlpSpec& u_spec, const ParamVector& u_params,
                             const TestFunction& tf) {
  BatchCoefficients co = build_coefficients(p, batch, tf.weight);
  PointSetEval u = eval_net_on(u_spec, u_params, batch.interior, true);
  PointSetEval v = eval_net_on(tf.spec, tf.params, batch.interior, true);
  PointSetEval phi = compose_phi(v, co.w_vals, co.w_grads);
  Vector uT, phiT, phi0;
  if (p.parabolic()) {
    uT = eval_net_on(u_spec, u_params, co.pts_T, false).values;
    PointSetEval vT = eval_net_on(tf.spec, tf.params, co.pts_T, false);
    PointSetEval v0 = eval_net_on(tf.spec, tf.params, batch.initial, false);
    phiT = co.w_at_initial.array() * vT.values.array();
    phi0 = co.w_at_initial.array() * v0.values.array();
  }
  return pairing_stats(p, batch, co, u, phi, uT, phiT, phi0).estimate;
}

/// Numeric LossBreakdown for fixed networks (logging, tests): both networks
/// enter a frozen tape, so no gradients are accumulated.
inline LossBreakdown total_loss(const PdeProblem& p, const CollocationBatch& batch,
                                const MlpSpec& u_spec, const ParamVector& u_params,
                                const TestFunction& tf, LossForms forms, Real alpha, Real gamma) {
  ObjectiveContext ctx = make_context(p, batch, tf.weight, forms, alpha, gamma);
  Tape t;
  int us = t.watch_net(u_spec, u_params, false);
  int vs = t.watch_net(tf.spec, tf.params, false);
  UOutputs u = eval_u_on_tape(t, us, p, batch, ctx.coeffs);
  PhiOutputs phi = eval_phi_on_tape(t, vs, p, batch, ctx.coeffs);
  LossBreakdown out;
  total_loss_on_tape(t, ctx, u, phi, &out);
  return out;
}

/// The three space-time weak-form terms (terminal, time-derivative, spatial),
/// each scaled by its region measure; their sum estimates <A[u], phi>.
inline void spacetime_weak_terms(const PdeProblem& p, const CollocationBatch& batch,
                                 const MlpSpec& u_spec, const ParamVector& u_params,
                                 const TestFunction& tf, Real& terminal_term, Real& time_term,
                                 Real& spatial_term) {
  if (!p.parabolic()) throw ConfigError("spacetime_weak_terms: problem is not parabolic");
  if (!p.h) throw ConfigError("spacetime_weak_terms: missing initial data h");
  BatchCoefficients co = build_coefficients(p, batch, tf.weight);
  PointSetEval u = eval_net_on(u_spec, u_params, batch.interior, true);
  PointSetEval v = eval_net_on(tf.spec, tf.params, batch.interior, true);
  PointSetEval phi = compose_phi(v, co.w_vals, co.w_grads);
  const int d = p.dim();
  Real measure = batch.volume * batch.horizon;

  {
    Vector I_full = integrand_values(p, batch, co, u, phi);
    // split off the -u dphi/dt part to isolate the spatial term
    Vector ut = u.values.array() * phi.grads.col(d).array();
    time_term = -measure * ut.mean();
    spatial_term = measure * (I_full + ut).mean();
  }

  Vector uT = eval_net_on(u_spec, u_params, co.pts_T, false).values;
  Vector vT = eval_net_on(tf.spec, tf.params, co.pts_T, false).values;
  Vector v0 = eval_net_on(tf.spec, tf.params, batch.initial, false).values;
  Vector term = uT.array() * co.w_at_initial.array() * vT.array() -
                co.h_vals.array() * co.w_at_initial.array() * v0.array();
  terminal_term = batch.volume * term.mean();
}

}  // namespace wan
