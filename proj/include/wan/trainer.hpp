#pragma once

// The alternating min-max training loops: the static loop (fresh collocation
// batch per outer iteration, K_u descent steps on theta, then K_phi ascent
// steps on eta), the semi-discrete parabolic driver (Crank-Nicolson steps,
// each solved by the static loop), and the joint space-time loop (same
// structure with interior/boundary/initial space-time batches).

#include "wan/checkpoint.hpp"
#include "wan/evaluation.hpp"
#include "wan/objective.hpp"
#include "wan/optimizer.hpp"

#include <chrono>
#include <fstream>
#include <limits>

namespace wan {

struct TrainConfig {
  int K_u = 1, K_phi = 1;
  Real tau_theta = 0.015, tau_eta = 0.04;
  int N_r = 1000, N_b = 0, N_a = 0;
  Real alpha = 1e4, gamma = 0.0;
  int max_iterations = 20000;
  int resample_every = 1;  // fresh batch every outer iteration, per the algorithm
  OptimizerKind theta_optimizer = OptimizerKind::AdaGrad;
  OptimizerKind eta_optimizer = OptimizerKind::AdaGrad;
  AdamParams adam;
  std::uint64_t seed = 0;
  int log_every = 10;
  IntForm u_loss_form = IntForm::Direct;
  BdryForm bdry_form = BdryForm::Squared;
  Real target_rel_error = 0.0;  // early stop when positive and reached
  int checkpoint_every = 0;     // outer iterations; 0 = only on completion
  std::string checkpoint_path;  // trainer-state file (optional)
  std::string trace_path;       // CSV trace stream (optional)
  std::uint64_t config_digest = 0;
  bool record_update_order = false;  // instrumentation for loop-order tests

  void validate() const {
    if (K_u < 1 || K_phi < 1) throw ConfigError("K_u and K_phi must be positive");
    if (!(tau_theta > 0) || !(tau_eta > 0)) throw ConfigError("learning rates must be positive");
    if (N_r < 1) throw ConfigError("N_r must be positive");
    if (max_iterations < 0) throw ConfigError("max_iterations must be non-negative");
    if (resample_every < 1) throw ConfigError("resample_every must be positive");
    if (!(alpha > 0)) throw ConfigError("alpha must be positive");
    if (log_every < 1) throw ConfigError("log_every must be positive");
  }
};

struct TraceRow {
  std::int64_t iteration = 0;
  LossBreakdown loss;
  Real rel_error = std::numeric_limits<Real>::quiet_NaN();
  Real seconds = 0;
  std::uint64_t rng_digest = 0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
  std::int64_t theta_updates = 0, eta_updates = 0, resamples = 0;
  std::string order_log;  // 'S' sample, 'U' theta step, 'V' eta step (when recorded)
};

struct TrainResult {
  ParamVector u_params;
  ParamVector v_params;
  TrainTrace trace;
  TrainState final_state;
  Real final_rel_error = std::numeric_limits<Real>::quiet_NaN();
};

/// Training failed (non-finite loss/gradient or a collapsed test function);
/// carries the last logged good state.
struct TrainingAbort : Error {
  TrainState last_good;
  std::int64_t at_iteration = 0;
  TrainingAbort(const std::string& msg, TrainState state, std::int64_t iter)
      : Error(msg), last_good(std::move(state)), at_iteration(iter) {}
};

/// Per-iteration batch seed: stateless in the iteration index, so resumed
/// runs draw exactly the batches the uninterrupted run would have drawn.
inline std::uint64_t iteration_seed(std::uint64_t seed, std::int64_t iter) {
  std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(iter + 1));
  return splitmix64(s);
}

namespace trainer_detail {

inline CachedPhi compute_cached_phi(const PdeProblem& p, const CollocationBatch& batch,
                                    const BatchCoefficients& co, const MlpSpec& v_spec,
                                    const ParamVector& eta) {
  CachedPhi c;
  Vector vv;
  Matrix gv;
  net_eval_batch(v_spec, eta, batch.interior, vv, &gv);
  c.value = co.w_vals.array() * vv.array();
  c.grads.resize(gv.rows(), gv.cols());
  for (int j = 0; j < gv.cols(); ++j)
    c.grads.col(j) = co.w_vals.array() * gv.col(j).array() + co.w_grads.col(j).array() * vv.array();
  if (p.parabolic() && batch.n_initial() > 0) {
    Vector vT, v0;
    net_eval_batch(v_spec, eta, co.pts_T, vT, nullptr);
    net_eval_batch(v_spec, eta, batch.initial, v0, nullptr);
    c.value_T = co.w_at_initial.array() * vT.array();
    c.value_0 = co.w_at_initial.array() * v0.array();
  }
  return c;
}

inline CachedU compute_cached_u(const PdeProblem& p, const CollocationBatch& batch,
                                const BatchCoefficients& co, const MlpSpec& u_spec,
                                const ParamVector& theta) {
  CachedU c;
  net_eval_batch(u_spec, theta, batch.interior, c.value, &c.grads);
  if (p.parabolic() && batch.n_initial() > 0)
    net_eval_batch(u_spec, theta, co.pts_T, c.term_value, nullptr);
  return c;
}

inline void write_trace_header(std::ofstream& os, std::uint64_t digest) {
  os << "# config_digest=" << hex64(digest) << "\n";
  os << "iteration,L_int,L_bdry,L_init,total,pairing,test_norm,rel_error,seconds\n";
}

inline void write_trace_row(std::ofstream& os, const TraceRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.3f\n",
                static_cast<long long>(r.iteration), r.loss.L_int, r.loss.L_bdry, r.loss.L_init,
                r.loss.total, r.loss.pairing, r.loss.test_norm_sq, r.rel_error, r.seconds);
  os << buf;
}

}  // namespace trainer_detail

/// The static alternating loop (also drives the joint space-time problem).
/// Optional arguments: an evaluation set for relative-error logging, a resume
/// state, and warm-start parameter vectors.
inline TrainResult run_wan(const PdeProblem& problem, const MlpSpec& u_spec,
                           const MlpSpec& v_spec, const TrainConfig& cfg,
                           const EvalSet* eval_set = nullptr, const TrainState* resume = nullptr,
                           const ParamVector* theta0 = nullptr,
                           const ParamVector* eta0 = nullptr) {
  cfg.validate();
  u_spec.validate();
  v_spec.validate();
  if (u_spec.input_dim != problem.domain.input_dim() || v_spec.input_dim != problem.domain.input_dim())
    throw ConfigError("network input dimension does not match the problem domain");
  if (problem.parabolic() && !(cfg.gamma > 0))
    throw ConfigError("parabolic training needs gamma > 0");

  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();

  TrainResult res;
  ParamVector theta, eta;
  Optimizer theta_opt, eta_opt;
  std::int64_t start_iter = 0;
  Real base_seconds = 0;
  if (resume) {
    if (!(resume->u_spec == u_spec) || !(resume->v_spec == v_spec))
      throw ConfigError("resume state has different network architectures");
    theta = resume->u_params;
    eta = resume->v_params;
    theta_opt = resume->theta_opt;
    eta_opt = resume->eta_opt;
    start_iter = resume->iteration;
    base_seconds = resume->elapsed_seconds;
  } else {
    theta = theta0 ? *theta0 : init_params(u_spec, splitmix64_mix(cfg.seed, 101));
    eta = eta0 ? *eta0 : init_params(v_spec, splitmix64_mix(cfg.seed, 202));
    theta_opt = Optimizer::make(cfg.theta_optimizer, cfg.tau_theta, u_spec.param_count(), cfg.adam);
    eta_opt = Optimizer::make(cfg.eta_optimizer, cfg.tau_eta, v_spec.param_count(), cfg.adam);
  }

  TestWeight weight = analytic_weight(problem.domain);
  LossForms forms;
  forms.u_form = cfg.u_loss_form;
  forms.bdry_form = cfg.bdry_form;

  auto snapshot = [&](std::int64_t iter, Real secs) {
    TrainState st;
    st.config_digest = cfg.config_digest;
    st.iteration = iter;
    st.elapsed_seconds = secs;
    st.u_spec = u_spec;
    st.u_params = theta;
    st.v_spec = v_spec;
    st.v_params = eta;
    st.theta_opt = theta_opt;
    st.eta_opt = eta_opt;
    return st;
  };

  std::ofstream trace_os;
  if (!cfg.trace_path.empty()) {
    bool fresh = start_iter == 0;
    trace_os.open(cfg.trace_path, fresh ? std::ios::trunc : std::ios::app);
    if (!trace_os) throw IoError("cannot open trace file '" + cfg.trace_path + "'");
    if (fresh) trainer_detail::write_trace_header(trace_os, cfg.config_digest);
  }

  TrainState last_good = snapshot(start_iter, base_seconds);
  CollocationBatch batch;
  ObjectiveContext ctx;
  bool have_batch = false;
  std::int64_t completed = start_iter;

  auto elapsed = [&] {
    return base_seconds + std::chrono::duration<Real>(clock::now() - t_start).count();
  };

  try {
    for (std::int64_t iter = start_iter + 1; iter <= cfg.max_iterations; ++iter) {
      if (!have_batch || ((iter - 1) % cfg.resample_every) == 0) {
        batch = make_batch(problem.domain, cfg.N_r, cfg.N_b, cfg.N_a,
                           iteration_seed(cfg.seed, iter));
        ctx = make_context(problem, batch, weight, forms, cfg.alpha,
                           problem.parabolic() ? cfg.gamma : 0.0);
        have_batch = true;
        res.trace.resamples++;
        if (cfg.record_update_order) res.trace.order_log += 'S';
      }

      CachedPhi phi_cache =
          trainer_detail::compute_cached_phi(problem, batch, ctx.coeffs, v_spec, eta);
      LossBreakdown lb{};
      for (int k = 0; k < cfg.K_u; ++k) {
        Tape t;
        int slot = t.watch_net(u_spec, theta, true);
        UOutputs u = eval_u_on_tape(t, slot, problem, batch, ctx.coeffs);
        PhiOutputs phi = phi_outputs_from_cache(t, phi_cache);
        Sc total = total_loss_on_tape(t, ctx, u, phi, &lb);
        t.backward(total);
        theta_opt.apply(theta, t.net_grad(slot), -1.0);
        res.trace.theta_updates++;
        if (cfg.record_update_order) res.trace.order_log += 'U';
      }

      CachedU u_cache = trainer_detail::compute_cached_u(problem, batch, ctx.coeffs, u_spec, theta);
      for (int k = 0; k < cfg.K_phi; ++k) {
        Tape t;
        int vslot = t.watch_net(v_spec, eta, true);
        PhiOutputs phi = eval_phi_on_tape(t, vslot, problem, batch, ctx.coeffs);
        UOutputs u = u_outputs_from_cache(t, u_cache);
        Sc lint = eta_loss_on_tape(t, ctx, u, phi, nullptr);
        t.backward(lint);
        eta_opt.apply(eta, t.net_grad(vslot), +1.0);
        res.trace.eta_updates++;
        if (cfg.record_update_order) res.trace.order_log += 'V';
      }

      completed = iter;
      bool want_log = (iter % cfg.log_every == 0) || iter == cfg.max_iterations;
      if (want_log) {
        TraceRow row;
        row.iteration = iter;
        row.loss = lb;  // the breakdown from the last theta step of this iteration
        if (eval_set && problem.has_exact())
          row.rel_error = relative_l2_error(u_spec, theta, problem, *eval_set);
        row.seconds = elapsed();
        row.rng_digest = iteration_seed(cfg.seed, iter);
        res.trace.rows.push_back(row);
        if (trace_os.is_open()) {
          trainer_detail::write_trace_row(trace_os, row);
          trace_os.flush();
        }
        last_good = snapshot(iter, row.seconds);
        if (cfg.target_rel_error > 0 && row.rel_error <= cfg.target_rel_error) break;
      }
      if (cfg.checkpoint_every > 0 && !cfg.checkpoint_path.empty() &&
          iter % cfg.checkpoint_every == 0)
        save_train_state(cfg.checkpoint_path, snapshot(iter, elapsed()));
    }
  } catch (const NonFiniteError& e) {
    if (!cfg.checkpoint_path.empty()) save_train_state(cfg.checkpoint_path, last_good);
    throw TrainingAbort(std::string("training aborted on non-finite value: ") + e.what(),
                        last_good, last_good.iteration);
  } catch (const DegenerateTestFunctionError& e) {
    if (!cfg.checkpoint_path.empty()) save_train_state(cfg.checkpoint_path, last_good);
    throw TrainingAbort(std::string("training aborted: ") + e.what(), last_good,
                        last_good.iteration);
  }

  res.u_params = theta;
  res.v_params = eta;
  res.final_state = snapshot(completed, elapsed());
  if (eval_set && problem.has_exact())
    res.final_rel_error = relative_l2_error(u_spec, theta, problem, *eval_set);
  if (!cfg.checkpoint_path.empty()) save_train_state(cfg.checkpoint_path, res.final_state);
  return res;
}

/// Joint space-time training (the networks take d+1 inputs).
inline TrainResult run_wan_spacetime(const PdeProblem& problem, const MlpSpec& u_spec,
                                     const MlpSpec& v_spec, const TrainConfig& cfg,
                                     const EvalSet* eval_set = nullptr,
                                     const TrainState* resume = nullptr) {
  if (!problem.parabolic()) throw ConfigError("run_wan_spacetime: problem is not parabolic");
  if (cfg.N_a < 1) throw ConfigError("run_wan_spacetime: N_a must be positive");
  return run_wan(problem, u_spec, v_spec, cfg, eval_set, resume);
}

// ---------------------------------------------------------------------------
// Semi-discretization in time
// ---------------------------------------------------------------------------

struct SemidiscreteResult {
  std::vector<ParamVector> step_params;  // u(., t_n) for n = 1..N
  std::vector<TrainTrace> step_traces;
  std::vector<Real> step_errors;         // per-step final relative error (if exact known)
  MlpSpec u_spec;
};

/// Crank-Nicolson semi-discretization: solves a static elliptic problem per
/// time step with the static loop, warm-starting each step's networks from
/// the previous step.
inline SemidiscreteResult run_wan_semidiscrete(const PdeProblem& problem, const MlpSpec& u_spec,
                                               const MlpSpec& v_spec, const TrainConfig& cfg,
                                               int n_time, const EvalSet* eval_spatial = nullptr) {
  if (!problem.parabolic()) throw ConfigError("run_wan_semidiscrete: problem is not parabolic");
  if (n_time < 1) throw ConfigError("run_wan_semidiscrete: need at least one time step");
  if (!problem.h) throw ConfigError("run_wan_semidiscrete: missing initial data h");
  const Real T = problem.domain.horizon;
  const Real h_step = T / n_time;

  SemidiscreteResult out;
  out.u_spec = u_spec;

  // initial data as a frozen field (analytic gradient when supplied)
  FrozenField u_prev;
  {
    auto h = problem.h;
    u_prev.value = [h](const Vector& x) { return h(x, 0.0); };
    if (problem.h_grad) {
      auto hg = problem.h_grad;
      u_prev.grad = [hg](const Vector& x) { return hg(x, 0.0); };
    } else {
      auto hfn = problem.h;
      u_prev.grad = [hfn](const Vector& x) {
        Vector g(x.size());
        Vector y = x;
        for (int i = 0; i < x.size(); ++i) {
          y(i) = x(i) + kDivGradFdStep;
          Real fp = hfn(y, 0.0);
          y(i) = x(i) - kDivGradFdStep;
          Real fm = hfn(y, 0.0);
          y(i) = x(i);
          g(i) = (fp - fm) / (2.0 * kDivGradFdStep);
        }
        return g;
      };
    }
  }

  ParamVector theta, eta;
  bool warm = false;
  for (int n = 0; n < n_time; ++n) {
    Real t_n = n * h_step;
    PdeProblem q = crank_nicolson_subproblem(problem, u_prev, t_n, h_step);
    TrainConfig step_cfg = cfg;
    step_cfg.gamma = 0.0;
    step_cfg.N_a = 0;
    step_cfg.seed = splitmix64_mix(cfg.seed, static_cast<std::uint64_t>(1000 + n));
    if (!cfg.trace_path.empty())
      step_cfg.trace_path = cfg.trace_path + ".t" + std::to_string(n + 1);
    if (!cfg.checkpoint_path.empty())
      step_cfg.checkpoint_path = cfg.checkpoint_path + ".t" + std::to_string(n + 1);
    try {
      TrainResult r = run_wan(q, u_spec, v_spec, step_cfg, eval_spatial, nullptr,
                              warm ? &theta : nullptr, warm ? &eta : nullptr);
      theta = r.u_params;
      eta = r.v_params;
      warm = true;
      out.step_params.push_back(theta);
      out.step_traces.push_back(std::move(r.trace));
      out.step_errors.push_back(r.final_rel_error);
    } catch (TrainingAbort& e) {
      throw TrainingAbort("time step " + std::to_string(n + 1) + "/" + std::to_string(n_time) +
                              ": " + e.what(),
                          e.last_good, e.at_iteration);
    }
    auto sp = std::make_shared<MlpSpec>(u_spec);
    auto pp = std::make_shared<ParamVector>(theta);
    u_prev = make_network_field(sp, pp);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optional pre-trained boundary weight
// ---------------------------------------------------------------------------

/// Trains w_xi to vanish on the boundary and stay positive inside by
/// minimizing sum_b |w(x_b)| - epsilon sum_r log w(x_r); a softplus output
/// head keeps the interior log defined. The result is frozen afterwards.
inline ParamVector pretrain_w(const Domain& dom, const MlpSpec& w_spec,
                              const CollocationBatch& batch, Real epsilon, int iterations,
                              Real tau, std::uint64_t seed) {
  if (!(epsilon > 0)) throw ConfigError("pretrain_w: epsilon must be positive");
  ParamVector xi = init_params(w_spec, seed);
  Optimizer opt = Optimizer::adagrad(tau, w_spec.param_count());
  (void)dom;
  for (int it = 0; it < iterations; ++it) {
    Tape t;
    int slot = t.watch_net(w_spec, xi, true);
    NetOut on_b = t.net_eval(slot, batch.boundary, false);
    NetOut on_r = t.net_eval(slot, batch.interior, false);
    Sc loss = t.sum(t.abs(t.softplus(on_b.value)));
    loss = t.sub(loss, t.scale(t.sum(t.log(t.softplus(on_r.value), "w_interior")), epsilon));
    t.backward(loss);
    opt.apply(xi, t.net_grad(slot), -1.0);
  }
  return xi;
}

}  // namespace wan
