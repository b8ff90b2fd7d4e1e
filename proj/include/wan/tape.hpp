#pragma once

// Reverse-mode tape over batch-valued expressions. Leaves are constants and
// network evaluations; interior nodes are the registered operations the loss
// estimators are built from (elementwise arithmetic, log, abs, square,
// pointwise closures, and batch reductions). Differentiating a scalar root
// yields exact gradients of the discrete Monte Carlo objective with respect
// to the parameters of every watched network, including through input-grad
// terms (mixed d2u/dtheta dx).

#include "wan/net_kernels.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace wan {

class Tape;

/// Handle to a batch-vector node.
struct Bv {
  int id = -1;
};
/// Handle to a scalar node.
struct Sc {
  int id = -1;
};

/// Outputs of a network evaluation over a batch of points.
struct NetOut {
  Bv value;
  std::vector<Bv> grad;  // one entry per input dimension; empty if not requested
};

/// Pointwise closure with user-supplied partial derivatives: given the k
/// argument values at one point, value() returns f and partials() the k
/// partial derivatives.
struct PointwiseFn {
  std::function<Real(const Real*)> value;
  std::function<void(const Real*, Real*)> partials;
};

/// Batches up to this many points keep their forward records for the reverse
/// pass; larger batches are recomputed chunk-wise to bound memory.
inline constexpr int kKeepRecordsMax = 32768;

class Tape {
 public:
  // -- networks -------------------------------------------------------------

  /// Registers a network on the tape. If trainable, backward() accumulates
  /// the gradient with respect to its parameters.
  int watch_net(const MlpSpec& spec, const ParamVector& params, bool trainable = true) {
    spec.validate();
    if (params.size() != spec.param_count())
      throw DimensionError("watch_net: parameter vector length does not match spec");
    slots_.push_back(Slot{spec, &params, trainable, Vector()});
    return static_cast<int>(slots_.size()) - 1;
  }

  /// Evaluates the watched network on `points` (rows). Both the value and,
  /// when need_input_grad, the input-gradient components become first-class
  /// tape variables. For trainable networks the per-chunk forward records are
  /// kept for the reverse pass (recomputed chunk-wise for very large batches).
  NetOut net_eval(int slot, const Matrix& points, bool need_input_grad = true) {
    const Slot& s = slots_.at(static_cast<size_t>(slot));
    int n = static_cast<int>(points.rows());
    bool keep = s.trainable && n <= kKeepRecordsMax;
    Vector u;
    Matrix G;
    auto records = keep ? std::make_shared<std::vector<NetChunkRecord>>() : nullptr;
    net_eval_batch(s.spec, *s.params, points, u, need_input_grad ? &G : nullptr, records.get());

    nodes_.push_back(Node{});
    int eval_id = last();
    Node& ev = nodes_.back();
    ev.op = Op::NetEval;
    ev.slot = slot;
    ev.needs_grad = s.trainable;
    ev.points = std::make_shared<Matrix>(points);
    ev.records = records;
    ev.with_jac = need_input_grad;
    ev.batch = n;

    NetOut out;
    out.value = make_vec(Op::NetOutput, std::move(u), s.trainable);
    nodes_[static_cast<size_t>(out.value.id)].a = eval_id;
    if (need_input_grad) {
      out.grad.reserve(static_cast<size_t>(s.spec.input_dim));
      for (int j = 0; j < s.spec.input_dim; ++j) {
        Bv gj = make_vec(Op::NetOutput, G.col(j), s.trainable);
        nodes_[static_cast<size_t>(gj.id)].a = eval_id;
        out.grad.push_back(gj);
      }
    }
    nodes_[static_cast<size_t>(eval_id)].outputs_begin = out.value.id;
    return out;
  }

  /// Parameter gradient of the backward()-ed root for a watched network.
  const Vector& net_grad(int slot) const {
    const Slot& s = slots_.at(static_cast<size_t>(slot));
    if (s.grad.size() == 0) const_cast<Slot&>(s).grad = Vector::Zero(s.spec.param_count());
    return s.grad;
  }

  // -- leaves ---------------------------------------------------------------

  Bv constant(Vector v) { return make_vec(Op::ConstVec, std::move(v), false); }
  Sc constant(Real v) {
    nodes_.push_back(Node{});
    Node& nd = nodes_.back();
    nd.op = Op::ConstScalar;
    nd.scalar = v;
    nd.is_vec = false;
    return Sc{last()};
  }

  // -- elementwise vector ops -----------------------------------------------

  Bv add(Bv a, Bv b) { return binary(Op::AddVV, a, b, vec(a) + vec(b)); }
  Bv sub(Bv a, Bv b) { return binary(Op::SubVV, a, b, vec(a) - vec(b)); }
  Bv mul(Bv a, Bv b) { return binary(Op::MulVV, a, b, (vec(a).array() * vec(b).array()).matrix()); }
  Bv div(Bv a, Bv b) { return binary(Op::DivVV, a, b, (vec(a).array() / vec(b).array()).matrix()); }

  /// y = c * x + d with scalar constants.
  Bv affine(Bv x, Real c, Real d = 0.0) {
    Bv r = unary(Op::AffineV, x, (c * vec(x).array() + d).matrix());
    nodes_[static_cast<size_t>(r.id)].c0 = c;
    return r;
  }
  Bv neg(Bv x) { return affine(x, -1.0); }

  Bv square(Bv x) { return unary(Op::SquareV, x, vec(x).array().square().matrix()); }
  Bv abs(Bv x) { return unary(Op::AbsV, x, vec(x).array().abs().matrix()); }
  Bv softplus(Bv x) {
    const auto& v = vec(x).array();
    return unary(Op::SoftplusV, x, (v.max(0.0) + (-v.abs()).exp().log1p()).matrix());
  }
  Bv log(Bv x, const std::string& term) {
    const Vector& v = vec(x);
    if ((v.array() <= 0.0).any()) throw LogDomainError(term);
    Bv r = unary(Op::LogV, x, v.array().log().matrix());
    nodes_[static_cast<size_t>(r.id)].label = term;
    return r;
  }

  /// Elementwise closure with supplied partials (registered operation used
  /// for problem nonlinearities).
  Bv pointwise(const std::vector<Bv>& args, PointwiseFn fn) {
    if (args.empty()) throw ConfigError("pointwise: needs at least one argument");
    int n = static_cast<int>(vec(args[0]).size());
    Vector out(n);
    std::vector<const Vector*> in;
    in.reserve(args.size());
    bool ng = false;
    for (Bv a : args) {
      in.push_back(&vec(a));
      ng = ng || nodes_[static_cast<size_t>(a.id)].needs_grad;
    }
    std::vector<Real> buf(args.size());
    for (int i = 0; i < n; ++i) {
      for (size_t k = 0; k < args.size(); ++k) buf[k] = (*in[k])(i);
      out(i) = fn.value(buf.data());
    }
    Bv r = make_vec(Op::Pointwise, std::move(out), ng);
    Node& nd = nodes_[static_cast<size_t>(r.id)];
    nd.args = std::make_shared<std::vector<int>>();
    for (Bv a : args) nd.args->push_back(a.id);
    nd.pw = std::make_shared<PointwiseFn>(std::move(fn));
    return r;
  }

  // -- reductions -----------------------------------------------------------

  Sc sum(Bv x) { return reduce(Op::SumV, x, vec(x).sum()); }
  Sc dot(Bv a, Bv b) {
    Sc r = reduce(Op::DotVV, a, vec(a).dot(vec(b)));
    nodes_[static_cast<size_t>(r.id)].b = b.id;
    nodes_[static_cast<size_t>(r.id)].needs_grad =
        nodes_[static_cast<size_t>(a.id)].needs_grad || nodes_[static_cast<size_t>(b.id)].needs_grad;
    return r;
  }
  Sc mean(Bv x) {
    int n = static_cast<int>(vec(x).size());
    if (n == 0) throw ConfigError("mean over empty batch");
    return scale(sum(x), 1.0 / n);
  }

  // -- scalar ops -------------------------------------------------------------

  Sc add(Sc a, Sc b) { return sbinary(Op::AddSS, a, b, sval(a) + sval(b)); }
  Sc sub(Sc a, Sc b) { return sbinary(Op::SubSS, a, b, sval(a) - sval(b)); }
  Sc mul(Sc a, Sc b) { return sbinary(Op::MulSS, a, b, sval(a) * sval(b)); }
  Sc div(Sc a, Sc b) { return sbinary(Op::DivSS, a, b, sval(a) / sval(b)); }
  Sc scale(Sc a, Real c, Real d = 0.0) {
    Sc r = sunary(Op::AffineS, a, c * sval(a) + d);
    nodes_[static_cast<size_t>(r.id)].c0 = c;
    return r;
  }
  Sc square(Sc a) { return sunary(Op::SquareS, a, sval(a) * sval(a)); }
  Sc abs(Sc a) { return sunary(Op::AbsS, a, std::abs(sval(a))); }
  Sc log(Sc a, const std::string& term) {
    if (!(sval(a) > 0.0)) throw LogDomainError(term);
    Sc r = sunary(Op::LogS, a, std::log(sval(a)));
    nodes_[static_cast<size_t>(r.id)].label = term;
    return r;
  }
  /// y = max(x, floor): clamps from below; zero gradient when clamped.
  Sc clamp_min(Sc a, Real floor) {
    Sc r = sunary(Op::ClampMinS, a, std::max(sval(a), floor));
    nodes_[static_cast<size_t>(r.id)].c0 = floor;
    return r;
  }

  // -- values & backward ------------------------------------------------------

  const Vector& vec(Bv v) const { return *nodes_.at(static_cast<size_t>(v.id)).vecval; }
  Real sval(Sc s) const { return nodes_.at(static_cast<size_t>(s.id)).scalar; }

  /// Reverse sweep from a scalar root. May be called once per tape.
  void backward(Sc root) {
    if (swept_) throw Error("Tape::backward called twice");
    swept_ = true;
    for (auto& s : slots_)
      if (s.grad.size() == 0) s.grad = Vector::Zero(s.spec.param_count());
    Node& r = nodes_.at(static_cast<size_t>(root.id));
    if (r.is_vec) throw Error("backward root must be scalar");
    if (!std::isfinite(r.scalar)) throw NonFiniteError("objective value is not finite");
    r.adj_s = 1.0;
    for (int i = root.id; i >= 0; --i) {
      Node& nd = nodes_[static_cast<size_t>(i)];
      if (!nd.needs_grad) continue;
      step_back(nd);
    }
  }

 private:
  enum class Op {
    ConstVec, ConstScalar, NetEval, NetOutput,
    AddVV, SubVV, MulVV, DivVV, AffineV, SquareV, AbsV, SoftplusV, LogV, Pointwise,
    SumV, DotVV,
    AddSS, SubSS, MulSS, DivSS, AffineS, SquareS, AbsS, LogS, ClampMinS,
  };

  struct Node {
    Op op = Op::ConstScalar;
    int a = -1, b = -1;
    bool is_vec = true;
    bool needs_grad = false;
    Real scalar = 0, c0 = 0;
    std::shared_ptr<Vector> vecval;
    Vector adj;           // lazily sized
    Real adj_s = 0;
    std::string label;
    // NetEval payload
    int slot = -1;
    std::shared_ptr<Matrix> points;
    std::shared_ptr<std::vector<NetChunkRecord>> records;
    bool with_jac = false;
    int batch = 0;
    int outputs_begin = -1;
    // Pointwise payload
    std::shared_ptr<std::vector<int>> args;
    std::shared_ptr<PointwiseFn> pw;
  };

  struct Slot {
    MlpSpec spec;
    const ParamVector* params;
    bool trainable;
    Vector grad;
  };

  int last() const { return static_cast<int>(nodes_.size()) - 1; }

  Bv make_vec(Op op, Vector v, bool needs_grad) {
    nodes_.push_back(Node{});
    Node& nd = nodes_.back();
    nd.op = op;
    nd.vecval = std::make_shared<Vector>(std::move(v));
    nd.needs_grad = needs_grad;
    return Bv{last()};
  }

  Bv binary(Op op, Bv a, Bv b, Vector v) {
    if (vec(a).size() != vec(b).size())
      throw DimensionError("tape: vector operands have different lengths");
    Bv r = make_vec(op, std::move(v),
                    nodes_[static_cast<size_t>(a.id)].needs_grad ||
                        nodes_[static_cast<size_t>(b.id)].needs_grad);
    nodes_[static_cast<size_t>(r.id)].a = a.id;
    nodes_[static_cast<size_t>(r.id)].b = b.id;
    return r;
  }
  Bv unary(Op op, Bv a, Vector v) {
    Bv r = make_vec(op, std::move(v), nodes_[static_cast<size_t>(a.id)].needs_grad);
    nodes_[static_cast<size_t>(r.id)].a = a.id;
    return r;
  }
  Sc reduce(Op op, Bv a, Real v) {
    nodes_.push_back(Node{});
    Node& nd = nodes_.back();
    nd.op = op;
    nd.scalar = v;
    nd.is_vec = false;
    nd.a = a.id;
    nd.needs_grad = nodes_[static_cast<size_t>(a.id)].needs_grad;
    return Sc{last()};
  }
  Sc sbinary(Op op, Sc a, Sc b, Real v) {
    Sc r = reduce(op, Bv{a.id}, v);
    nodes_[static_cast<size_t>(r.id)].b = b.id;
    nodes_[static_cast<size_t>(r.id)].needs_grad =
        nodes_[static_cast<size_t>(a.id)].needs_grad || nodes_[static_cast<size_t>(b.id)].needs_grad;
    return r;
  }
  Sc sunary(Op op, Sc a, Real v) { return reduce(op, Bv{a.id}, v); }

  Vector& adj(int id) {
    Node& nd = nodes_[static_cast<size_t>(id)];
    if (nd.adj.size() == 0) nd.adj = Vector::Zero(nd.vecval->size());
    return nd.adj;
  }
  void add_adj(int id, const Vector& v) {
    if (!nodes_[static_cast<size_t>(id)].needs_grad) return;
    adj(id) += v;
  }
  void add_adj_s(int id, Real v) {
    if (!nodes_[static_cast<size_t>(id)].needs_grad) return;
    nodes_[static_cast<size_t>(id)].adj_s += v;
  }

  void step_back(Node& nd) {
    switch (nd.op) {
      case Op::ConstVec:
      case Op::ConstScalar:
      case Op::NetOutput:
        return;  // NetOutput adjoints are consumed by the NetEval node below
      case Op::NetEval: {
        Slot& s = slots_[static_cast<size_t>(nd.slot)];
        if (!s.trainable) return;
        if (s.grad.size() == 0) s.grad = Vector::Zero(s.spec.param_count());
        // gather output adjoints
        int vid = nd.outputs_begin;
        Node& vout = nodes_[static_cast<size_t>(vid)];
        Vector ubar = vout.adj.size() ? vout.adj : Vector::Zero(nd.batch);
        if (nd.with_jac) {
          Matrix Gbar(nd.batch, s.spec.input_dim);
          bool any = vout.adj.size() != 0;
          for (int j = 0; j < s.spec.input_dim; ++j) {
            Node& gout = nodes_[static_cast<size_t>(vid + 1 + j)];
            if (gout.adj.size())
              Gbar.col(j) = gout.adj, any = true;
            else
              Gbar.col(j).setZero();
          }
          if (!any) return;
          if (nd.records)
            net_reverse_batch_records(s.spec, *s.params, *nd.records, ubar, &Gbar, s.grad);
          else
            net_reverse_batch(s.spec, *s.params, *nd.points, true, ubar, &Gbar, s.grad);
        } else {
          if (!vout.adj.size()) return;
          if (nd.records)
            net_reverse_batch_records(s.spec, *s.params, *nd.records, ubar, nullptr, s.grad);
          else
            net_reverse_batch(s.spec, *s.params, *nd.points, false, ubar, nullptr, s.grad);
        }
        return;
      }
      case Op::AddVV:
        if (nd.adj.size()) {
          add_adj(nd.a, nd.adj);
          add_adj(nd.b, nd.adj);
        }
        return;
      case Op::SubVV:
        if (nd.adj.size()) {
          add_adj(nd.a, nd.adj);
          if (nodes_[static_cast<size_t>(nd.b)].needs_grad) adj(nd.b) -= nd.adj;
        }
        return;
      case Op::MulVV:
        if (nd.adj.size()) {
          if (nodes_[static_cast<size_t>(nd.a)].needs_grad)
            adj(nd.a).array() += nd.adj.array() * vec(Bv{nd.b}).array();
          if (nodes_[static_cast<size_t>(nd.b)].needs_grad)
            adj(nd.b).array() += nd.adj.array() * vec(Bv{nd.a}).array();
        }
        return;
      case Op::DivVV:
        if (nd.adj.size()) {
          const auto& bv = vec(Bv{nd.b}).array();
          if (nodes_[static_cast<size_t>(nd.a)].needs_grad)
            adj(nd.a).array() += nd.adj.array() / bv;
          if (nodes_[static_cast<size_t>(nd.b)].needs_grad)
            adj(nd.b).array() -= nd.adj.array() * nd.vecval->array() / bv;
        }
        return;
      case Op::AffineV:
        if (nd.adj.size() && nodes_[static_cast<size_t>(nd.a)].needs_grad)
          adj(nd.a) += nd.c0 * nd.adj;
        return;
      case Op::SquareV:
        if (nd.adj.size() && nodes_[static_cast<size_t>(nd.a)].needs_grad)
          adj(nd.a).array() += 2.0 * nd.adj.array() * vec(Bv{nd.a}).array();
        return;
      case Op::AbsV:
        // subgradient 0 at the kink
        if (nd.adj.size() && nodes_[static_cast<size_t>(nd.a)].needs_grad)
          adj(nd.a).array() += nd.adj.array() * vec(Bv{nd.a}).array().sign();
        return;
      case Op::SoftplusV:
        if (nd.adj.size() && nodes_[static_cast<size_t>(nd.a)].needs_grad) {
          const auto& x = vec(Bv{nd.a}).array();
          auto e = (-x.abs()).exp();
          auto s = 1.0 / (1.0 + e);
          adj(nd.a).array() += nd.adj.array() * (x >= 0.0).select(s, 1.0 - s);
        }
        return;
      case Op::LogV:
        if (nd.adj.size() && nodes_[static_cast<size_t>(nd.a)].needs_grad)
          adj(nd.a).array() += nd.adj.array() / vec(Bv{nd.a}).array();
        return;
      case Op::Pointwise: {
        if (!nd.adj.size()) return;
        const auto& ids = *nd.args;
        std::vector<Real> buf(ids.size()), part(ids.size());
        int n = static_cast<int>(nd.vecval->size());
        std::vector<Vector*> target(ids.size(), nullptr);
        for (size_t k = 0; k < ids.size(); ++k)
          if (nodes_[static_cast<size_t>(ids[k])].needs_grad) target[k] = &adj(ids[k]);
        for (int i = 0; i < n; ++i) {
          for (size_t k = 0; k < ids.size(); ++k) buf[k] = vec(Bv{ids[k]})(i);
          nd.pw->partials(buf.data(), part.data());
          for (size_t k = 0; k < ids.size(); ++k)
            if (target[k]) (*target[k])(i) += nd.adj(i) * part[k];
        }
        return;
      }
      case Op::SumV:
        if (nd.adj_s != 0.0 && nodes_[static_cast<size_t>(nd.a)].needs_grad)
          adj(nd.a).array() += nd.adj_s;
        return;
      case Op::DotVV:
        if (nd.adj_s != 0.0) {
          if (nodes_[static_cast<size_t>(nd.a)].needs_grad)
            adj(nd.a) += nd.adj_s * vec(Bv{nd.b});
          if (nodes_[static_cast<size_t>(nd.b)].needs_grad)
            adj(nd.b) += nd.adj_s * vec(Bv{nd.a});
        }
        return;
      case Op::AddSS:
        add_adj_s(nd.a, nd.adj_s);
        add_adj_s(nd.b, nd.adj_s);
        return;
      case Op::SubSS:
        add_adj_s(nd.a, nd.adj_s);
        add_adj_s(nd.b, -nd.adj_s);
        return;
      case Op::MulSS:
        add_adj_s(nd.a, nd.adj_s * nodes_[static_cast<size_t>(nd.b)].scalar);
        add_adj_s(nd.b, nd.adj_s * nodes_[static_cast<size_t>(nd.a)].scalar);
        return;
      case Op::DivSS: {
        Real bva = nodes_[static_cast<size_t>(nd.b)].scalar;
        add_adj_s(nd.a, nd.adj_s / bva);
        add_adj_s(nd.b, -nd.adj_s * nd.scalar / bva);
        return;
      }
      case Op::AffineS:
        add_adj_s(nd.a, nd.adj_s * nd.c0);
        return;
      case Op::SquareS:
        add_adj_s(nd.a, 2.0 * nd.adj_s * nodes_[static_cast<size_t>(nd.a)].scalar);
        return;
      case Op::AbsS: {
        Real x = nodes_[static_cast<size_t>(nd.a)].scalar;
        add_adj_s(nd.a, nd.adj_s * (x > 0 ? 1.0 : x < 0 ? -1.0 : 0.0));
        return;
      }
      case Op::LogS:
        add_adj_s(nd.a, nd.adj_s / nodes_[static_cast<size_t>(nd.a)].scalar);
        return;
      case Op::ClampMinS:
        if (nodes_[static_cast<size_t>(nd.a)].scalar > nd.c0) add_adj_s(nd.a, nd.adj_s);
        return;
    }
  }

  std::vector<Node> nodes_;
  std::vector<Slot> slots_;
  bool swept_ = false;
};

// ---------------------------------------------------------------------------
// Objective-level entry points
// ---------------------------------------------------------------------------

/// A scalar objective expressed through tape operations. The builder receives
/// the tape and the slot of the network whose parameters are differentiated.
using ObjectiveBuilder = std::function<Sc(Tape&, int slot)>;

/// Exact gradient of the discrete objective with respect to `params`.
inline Vector objective_param_gradient(const ObjectiveBuilder& objective, const MlpSpec& spec,
                                       const ParamVector& params) {
  Tape t;
  int slot = t.watch_net(spec, params, true);
  Sc root = objective(t, slot);
  t.backward(root);
  return t.net_grad(slot);
}

inline Real objective_value(const ObjectiveBuilder& objective, const MlpSpec& spec,
                            const ParamVector& params) {
  Tape t;
  int slot = t.watch_net(spec, params, false);
  return t.sval(objective(t, slot));
}

/// Central-difference gradient, one objective evaluation pair per parameter.
inline Vector finite_difference_oracle(const std::function<Real(const ParamVector&)>& objective,
                                       const ParamVector& params, Real step) {
  if (!(step > 0)) throw ConfigError("finite_difference_oracle: step must be positive");
  Vector grad(params.size());
  ParamVector p = params;
  for (int i = 0; i < params.size(); ++i) {
    Real keep = p.data(i);
    p.data(i) = keep + step;
    Real fp = objective(p);
    p.data(i) = keep - step;
    Real fm = objective(p);
    p.data(i) = keep;
    grad(i) = (fp - fm) / (2.0 * step);
  }
  return grad;
}

}  // namespace wan
