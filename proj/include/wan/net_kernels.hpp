#pragma once

// Dense batched kernels for scalar-output MLPs: forward evaluation, analytic
// input-gradient propagation, and the reverse (parameter-adjoint) pass over a
// recorded forward computation. The reverse pass differentiates both the
// network value and its input gradient, which is what loss terms built from
// first derivatives require.
//
// Batch layout: points are rows. Input-Jacobians are kept "dim-stacked": a
// (D*n) x w matrix whose row block [j*n, (j+1)*n) holds d(activation)/d(x_j)
// for the whole chunk, so each layer's propagation is a single GEMM.

#include "wan/common.hpp"
#include "wan/mlp.hpp"

#include <malloc.h>

#include <mutex>
#include <vector>

namespace wan {

struct NetChunkRecord {
  Matrix X;                   // n x D inputs
  std::vector<Matrix> Z;      // hidden activations, Z[l] for layer l+1
  std::vector<Matrix> D1;     // activation first derivatives at pre-activations
  std::vector<Matrix> D2;     // activation second derivatives (jac mode only)
  std::vector<Matrix> Jst;    // stacked input-Jacobians of hidden activations
  bool has_jac = false;
  int n = 0;
};

// The kernels cycle multi-megabyte scratch matrices; keeping glibc from
// returning them to the kernel on every free avoids constant page faulting.
inline void tune_allocator_once() {
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
}

inline void check_finite_layer(const Matrix& m, int layer, const char* what) {
  if (!m.allFinite())
    throw NonFiniteError("non-finite " + std::string(what) + " in layer " + std::to_string(layer),
                         layer);
}

/// Forward pass over one chunk of points.
///   u   <- network values (n)
///   G   <- input gradients (n x D), filled when need_jac
///   rec <- forward record when keep_record (required for a later reverse).
inline void net_forward_chunk(const MlpSpec& spec, const ParamVector& params, Matrix Xc,
                              bool need_jac, bool keep_record, NetChunkRecord* rec, Vector& u,
                              Matrix* G) {
  tune_allocator_once();
  const int n = static_cast<int>(Xc.rows());
  const int D = spec.input_dim;
  const int L = spec.num_hidden();
  if (Xc.cols() != D)
    throw DimensionError("input has dimension " + std::to_string(Xc.cols()) + ", spec expects " +
                         std::to_string(D));
  if (params.size() != spec.param_count())
    throw DimensionError("parameter vector length " + std::to_string(params.size()) +
                         " does not match spec parameter count " +
                         std::to_string(spec.param_count()));

  const bool need_d1 = need_jac || keep_record;
  const bool need_d2 = need_jac && keep_record;
  if (keep_record) {
    rec->Z.assign(static_cast<size_t>(L), Matrix());
    rec->D1.assign(static_cast<size_t>(L), Matrix());
    rec->D2.assign(static_cast<size_t>(L), Matrix());
    rec->Jst.assign(static_cast<size_t>(L), Matrix());
    rec->has_jac = need_jac;
    rec->n = n;
    rec->X = std::move(Xc);
  }
  const Matrix& X0 = keep_record ? rec->X : Xc;

  Matrix P, D1tmp, D2tmp;
  Matrix Zbuf[2], Jbuf[2];
  const Matrix* Zprev = &X0;
  const Matrix* Jprev = nullptr;

  for (int l = 0; l < L; ++l) {
    const auto W = weights_of(spec, params, l);
    const auto b = biases_of(spec, params, l);

    P.noalias() = (*Zprev) * W.transpose();
    P.rowwise() += b.transpose();

    Matrix& Zn = keep_record ? rec->Z[static_cast<size_t>(l)] : Zbuf[l & 1];
    Matrix& D1 = keep_record ? rec->D1[static_cast<size_t>(l)] : D1tmp;
    Matrix& D2 = keep_record ? rec->D2[static_cast<size_t>(l)] : D2tmp;
    activation_batch(spec.activations[static_cast<size_t>(l)], P, Zn, need_d1 ? &D1 : nullptr,
                     need_d2 ? &D2 : nullptr);
    check_finite_layer(Zn, l, "activation");

    if (need_jac) {
      Matrix& Jn = keep_record ? rec->Jst[static_cast<size_t>(l)] : Jbuf[l & 1];
      Jn.resize(static_cast<Eigen::Index>(D) * n, W.rows());
      if (l == 0) {
        for (int j = 0; j < D; ++j) {
          auto blk = static_cast<Eigen::Index>(j) * n;
          Jn.middleRows(blk, n) = D1.array().rowwise() * W.col(j).transpose().array();
        }
      } else {
        Jn.noalias() = (*Jprev) * W.transpose();
        for (int j = 0; j < D; ++j) {
          auto blk = static_cast<Eigen::Index>(j) * n;
          Jn.middleRows(blk, n).array() *= D1.array();
        }
      }
      Jprev = &Jn;
    }
    Zprev = &Zn;
  }

  // output layer, no activation
  const auto Wo = weights_of(spec, params, L);
  const auto bo = biases_of(spec, params, L);
  u.noalias() = (*Zprev) * Wo.transpose();
  u.array() += bo(0);
  check_finite_layer(u, L, "output");
  if (need_jac) {
    G->resize(n, D);
    if (L == 0) {
      for (int j = 0; j < D; ++j) G->col(j).setConstant(Wo(0, j));
    } else {
      Vector g = (*Jprev) * Wo.row(0).transpose();
      for (int j = 0; j < D; ++j) G->col(j) = g.segment(static_cast<Eigen::Index>(j) * n, n);
    }
    check_finite_layer(*G, L, "output gradient");
  }
}

/// Reverse pass over a recorded chunk. Seeds are the adjoints of the outputs:
/// `ubar` for the value, `Gbar` for the input gradient (null when the forward
/// ran without Jacobians). Accumulates d(seeded scalar)/d(params) into grad.
inline void net_reverse_chunk(const MlpSpec& spec, const ParamVector& params,
                              const NetChunkRecord& rec, const Vector& ubar, const Matrix* Gbar,
                              Vector& grad) {
  const int n = rec.n;
  const int D = spec.input_dim;
  const int L = spec.num_hidden();
  const bool with_jac = rec.has_jac && Gbar != nullptr;

  ParamVector gview;  // map helpers expect a ParamVector
  gview.data.swap(grad);

  const Matrix& ZL = L == 0 ? rec.X : rec.Z[static_cast<size_t>(L - 1)];
  const auto Wo = weights_of(spec, params, L);
  {
    auto Wg = weights_of(spec, gview, L);
    auto bg = biases_of(spec, gview, L);
    Wg.row(0).noalias() += ubar.transpose() * ZL;
    if (with_jac) {
      if (L == 0) {
        for (int j = 0; j < D; ++j) Wg(0, j) += Gbar->col(j).sum();
      } else {
        const Matrix& JL = rec.Jst[static_cast<size_t>(L - 1)];
        for (int j = 0; j < D; ++j)
          Wg.row(0).noalias() +=
              Gbar->col(j).transpose() * JL.middleRows(static_cast<Eigen::Index>(j) * n, n);
      }
    }
    bg(0) += ubar.sum();
  }
  if (L == 0) {
    grad.swap(gview.data);
    return;
  }

  Matrix Zbar = ubar * Wo.row(0);  // n x w_L
  Matrix Jbar;                     // stacked (D*n) x w
  if (with_jac) {
    Jbar.resize(static_cast<Eigen::Index>(D) * n, Wo.cols());
    for (int j = 0; j < D; ++j)
      Jbar.middleRows(static_cast<Eigen::Index>(j) * n, n).noalias() = Gbar->col(j) * Wo.row(0);
  }

  Matrix Pbar, Abar, A, Q, Ztmp, Jtmp;
  for (int l = L - 1; l >= 0; --l) {
    const auto W = weights_of(spec, params, l);
    const Matrix& D1 = rec.D1[static_cast<size_t>(l)];
    const Matrix& Zprev = l == 0 ? rec.X : rec.Z[static_cast<size_t>(l - 1)];

    Pbar = D1.array() * Zbar.array();
    if (with_jac) {
      const Matrix& D2 = rec.D2[static_cast<size_t>(l)];
      // recompute the pre-activation Jacobian A of this layer
      if (l == 0) {
        A.resize(static_cast<Eigen::Index>(D) * n, D1.cols());
        for (int j = 0; j < D; ++j)
          A.middleRows(static_cast<Eigen::Index>(j) * n, n).rowwise() = W.col(j).transpose();
      } else {
        A.noalias() = rec.Jst[static_cast<size_t>(l - 1)] * W.transpose();
      }
      Q.setZero(n, D1.cols());
      Abar.resize(Jbar.rows(), Jbar.cols());
      for (int j = 0; j < D; ++j) {
        auto blk = static_cast<Eigen::Index>(j) * n;
        Q.array() += A.middleRows(blk, n).array() * Jbar.middleRows(blk, n).array();
        Abar.middleRows(blk, n) = D1.array() * Jbar.middleRows(blk, n).array();
      }
      Pbar.array() += D2.array() * Q.array();
    }

    auto Wg = weights_of(spec, gview, l);
    auto bg = biases_of(spec, gview, l);
    Wg.noalias() += Pbar.transpose() * Zprev;
    bg.noalias() += Pbar.colwise().sum().transpose();
    if (with_jac) {
      if (l == 0) {
        for (int j = 0; j < D; ++j)
          Wg.col(j).noalias() +=
              Abar.middleRows(static_cast<Eigen::Index>(j) * n, n).colwise().sum().transpose();
      } else {
        const Matrix& Jprev = rec.Jst[static_cast<size_t>(l - 1)];
        Wg.noalias() += Abar.transpose() * Jprev;
      }
    }

    if (l > 0) {
      Ztmp.noalias() = Pbar * W;
      Zbar.swap(Ztmp);
      if (with_jac) {
        Jtmp.noalias() = Abar * W;
        Jbar.swap(Jtmp);
      }
    }
  }
  grad.swap(gview.data);
}

// ---------------------------------------------------------------------------
// Whole-batch helpers (chunked, parallel over chunks, chunk-ordered sums)
// ---------------------------------------------------------------------------

inline constexpr int kChunkSize = 2048;

inline int num_chunks(int n) { return (n + kChunkSize - 1) / kChunkSize; }

namespace detail {

template <class Fn>
inline void parallel_chunks(int n, Fn&& fn) {
  const int nc = num_chunks(n);
  std::exception_ptr err;
  std::mutex err_mu;
  parallel_for(nc, [&](int c) {
    try {
      int lo = c * kChunkSize, len = std::min(kChunkSize, n - lo);
      fn(c, lo, len);
    } catch (...) {
      std::lock_guard<std::mutex> lk(err_mu);
      if (!err) err = std::current_exception();
    }
  });
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

/// Values (and optionally input gradients) of a network over a batch of
/// points. Pure function of its arguments; parallel over chunks. When
/// `records` is non-null, per-chunk forward records are kept for a later
/// reverse pass.
inline void net_eval_batch(const MlpSpec& spec, const ParamVector& params, const Matrix& X,
                           Vector& values, Matrix* grads,
                           std::vector<NetChunkRecord>* records = nullptr) {
  const int n = static_cast<int>(X.rows());
  values.resize(n);
  if (grads) grads->resize(n, spec.input_dim);
  if (records) records->assign(static_cast<size_t>(num_chunks(n)), NetChunkRecord{});
  if (n == 0) return;
  detail::parallel_chunks(n, [&](int c, int lo, int len) {
    Vector u;
    Matrix G;
    net_forward_chunk(spec, params, X.middleRows(lo, len), grads != nullptr, records != nullptr,
                      records ? &(*records)[static_cast<size_t>(c)] : nullptr, u,
                      grads ? &G : nullptr);
    values.segment(lo, len) = u;
    if (grads) grads->middleRows(lo, len) = G;
  });
}

/// Batched reverse over previously stored records; chunk contributions are
/// reduced in chunk order so the result is independent of the worker count.
inline void net_reverse_batch_records(const MlpSpec& spec, const ParamVector& params,
                                      const std::vector<NetChunkRecord>& records,
                                      const Vector& ubar, const Matrix* Gbar, Vector& grad) {
  const int nc = static_cast<int>(records.size());
  int n = 0;
  for (const auto& r : records) n += r.n;
  std::vector<Vector> partial(static_cast<size_t>(nc));
  detail::parallel_chunks(n, [&](int c, int lo, int len) {
    Vector g = Vector::Zero(spec.param_count());
    Vector ub = ubar.segment(lo, len);
    const NetChunkRecord& rec = records[static_cast<size_t>(c)];
    if (rec.has_jac && Gbar) {
      Matrix Gb = Gbar->middleRows(lo, len);
      net_reverse_chunk(spec, params, rec, ub, &Gb, g);
    } else {
      net_reverse_chunk(spec, params, rec, ub, nullptr, g);
    }
    partial[static_cast<size_t>(c)].swap(g);
  });
  for (int c = 0; c < nc; ++c) grad += partial[static_cast<size_t>(c)];
}

/// Batched reverse that recomputes forward records chunk by chunk (used when
/// records were not kept, e.g. very large batches).
inline void net_reverse_batch(const MlpSpec& spec, const ParamVector& params, const Matrix& X,
                              bool with_jac, const Vector& ubar, const Matrix* Gbar, Vector& grad) {
  const int n = static_cast<int>(X.rows());
  const int nc = num_chunks(n);
  std::vector<Vector> partial(static_cast<size_t>(nc));
  detail::parallel_chunks(n, [&](int c, int lo, int len) {
    NetChunkRecord rec;
    Vector u;
    Matrix G;
    net_forward_chunk(spec, params, X.middleRows(lo, len), with_jac, true, &rec, u,
                      with_jac ? &G : nullptr);
    Vector g = Vector::Zero(spec.param_count());
    Vector ub = ubar.segment(lo, len);
    if (with_jac && Gbar) {
      Matrix Gb = Gbar->middleRows(lo, len);
      net_reverse_chunk(spec, params, rec, ub, &Gb, g);
    } else {
      net_reverse_chunk(spec, params, rec, ub, nullptr, g);
    }
    partial[static_cast<size_t>(c)].swap(g);
  });
  if (nc > 0) {
    for (int c = 0; c < nc; ++c) grad += partial[static_cast<size_t>(c)];
  }
}

// ---------------------------------------------------------------------------
// Single-point interface
// ---------------------------------------------------------------------------

/// Result of evaluating a network at one point: the value, the exact analytic
/// gradient with respect to the input, and the forward record needed to later
/// differentiate any function of (value, input_grad) with respect to the
/// parameters.
struct EvalRecord {
  Real value = 0;
  Vector input_grad;
  NetChunkRecord record;
};

inline EvalRecord eval_with_input_grad(const MlpSpec& spec, const ParamVector& params,
                                       const Vector& x) {
  if (x.size() != spec.input_dim)
    throw DimensionError("point has dimension " + std::to_string(x.size()) + ", spec expects " +
                         std::to_string(spec.input_dim));
  EvalRecord out;
  Vector u;
  Matrix G;
  net_forward_chunk(spec, params, x.transpose(), true, true, &out.record, u, &G);
  out.value = u(0);
  out.input_grad = G.row(0).transpose();
  return out;
}

/// d(vbar * value + gbar . input_grad)/d(params) for a recorded evaluation.
inline Vector param_pullback(const MlpSpec& spec, const ParamVector& params, const EvalRecord& er,
                             Real vbar, const Vector& gbar) {
  Vector grad = Vector::Zero(spec.param_count());
  Vector ub(1);
  ub(0) = vbar;
  Matrix Gb = gbar.transpose();
  net_reverse_chunk(spec, params, er.record, ub, &Gb, grad);
  return grad;
}

}  // namespace wan
