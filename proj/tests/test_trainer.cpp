#include <catch2/catch_amalgamated.hpp>

#include "wan/trainer.hpp"

#include <cstdio>

using namespace wan;

namespace {

MlpSpec tiny(int d, int w = 8, int layers = 2) {
  MlpSpec s;
  s.input_dim = d;
  s.hidden_widths.assign(static_cast<size_t>(layers), w);
  s.activations.assign(static_cast<size_t>(layers), Activation::Tanh);
  s.activations.back() = Activation::Softplus;
  return s;
}

TrainConfig desk_config(const ProblemLibraryEntry& e, int iters) {
  TrainConfig c;
  c.K_u = e.K_u;
  c.K_phi = e.K_phi;
  c.tau_theta = e.tau_theta;
  c.tau_eta = e.tau_eta;
  c.N_r = 256;
  c.N_b = 4 * e.problem.domain.face_count();
  c.N_a = e.problem.parabolic() ? 32 : 0;
  c.alpha = e.alpha;
  c.gamma = e.problem.parabolic() ? e.alpha : 0.0;
  c.max_iterations = iters;
  c.seed = 7;
  c.log_every = 10;
  return c;
}

std::vector<Real> trace_losses(const TrainTrace& t) {
  std::vector<Real> v;
  for (const auto& r : t.rows) {
    v.push_back(r.loss.total);
    v.push_back(r.loss.L_int);
    v.push_back(r.loss.L_bdry);
    v.push_back(r.loss.pairing);
    v.push_back(r.loss.test_norm_sq);
  }
  return v;
}

}  // namespace

TEST_CASE("zero iterations returns the initialization with an empty trace") {
  const auto& e = find_problem("eq_weak");
  TrainConfig c = desk_config(e, 0);
  MlpSpec us = tiny(2), vs = tiny(2);
  TrainResult r = run_wan(e.problem, us, vs, c);
  CHECK(r.trace.rows.empty());
  CHECK(r.u_params.data == init_params(us, splitmix64_mix(c.seed, 101)).data);
  CHECK(r.v_params.data == init_params(vs, splitmix64_mix(c.seed, 202)).data);
}

TEST_CASE("identical seeds reproduce the trace bitwise") {
  const auto& e = find_problem("eq_weak");
  TrainConfig c = desk_config(e, 40);
  MlpSpec us = tiny(2), vs = tiny(2);
  TrainResult a = run_wan(e.problem, us, vs, c);
  TrainResult b = run_wan(e.problem, us, vs, c);
  REQUIRE(a.trace.rows.size() == b.trace.rows.size());
  CHECK(trace_losses(a.trace) == trace_losses(b.trace));
  CHECK(a.u_params.data == b.u_params.data);
  CHECK(a.v_params.data == b.v_params.data);

  TrainConfig c2 = c;
  c2.seed = 8;
  TrainResult d = run_wan(e.problem, us, vs, c2);
  CHECK(trace_losses(a.trace) != trace_losses(d.trace));
}

TEST_CASE("loop order: sample, K_u theta steps, K_phi eta steps") {
  const auto& e = find_problem("eq_weak");
  TrainConfig c = desk_config(e, 6);
  c.K_u = 2;
  c.K_phi = 3;
  c.record_update_order = true;
  MlpSpec us = tiny(2), vs = tiny(2);
  TrainResult r = run_wan(e.problem, us, vs, c);
  std::string per_iter = "SUUVVV";
  std::string expect;
  for (int i = 0; i < 6; ++i) expect += per_iter;
  CHECK(r.trace.order_log == expect);
  CHECK(r.trace.theta_updates == 12);
  CHECK(r.trace.eta_updates == 18);
  CHECK(r.trace.resamples == 6);

  SECTION("resample_every > 1 reuses batches") {
    TrainConfig c3 = c;
    c3.resample_every = 3;
    TrainResult r3 = run_wan(e.problem, us, vs, c3);
    CHECK(r3.trace.order_log == "SUUVVVUUVVVUUVVVSUUVVVUUVVVUUVVV");
    CHECK(r3.trace.resamples == 2);
  }
}

TEST_CASE("checkpoint round-trip continues the uninterrupted trace") {
  const auto& e = find_problem("eq_weak");
  MlpSpec us = tiny(2), vs = tiny(2);

  TrainConfig full = desk_config(e, 60);
  TrainResult straight = run_wan(e.problem, us, vs, full);

  std::string ckpt = "/tmp/wan_test_ckpt.bin";
  TrainConfig half = desk_config(e, 30);
  half.checkpoint_path = ckpt;
  run_wan(e.problem, us, vs, half);

  TrainState st = load_train_state(ckpt);
  CHECK(st.iteration == 30);
  TrainConfig rest = desk_config(e, 60);
  TrainResult resumed = run_wan(e.problem, us, vs, rest, nullptr, &st);

  // rows 30..60 of the resumed run must match the uninterrupted one
  REQUIRE(straight.trace.rows.size() == 6);
  REQUIRE(resumed.trace.rows.size() == 3);
  for (size_t k = 0; k < resumed.trace.rows.size(); ++k) {
    const TraceRow& a = straight.trace.rows[k + 3];
    const TraceRow& b = resumed.trace.rows[k];
    CHECK(a.iteration == b.iteration);
    CHECK(std::abs(a.loss.total - b.loss.total) <=
          1e-12 * std::max(1.0, std::abs(a.loss.total)));
    CHECK(std::abs(a.loss.L_int - b.loss.L_int) <= 1e-12 * std::max(1.0, std::abs(a.loss.L_int)));
  }
  std::remove(ckpt.c_str());
}

TEST_CASE("trace CSV stream carries the digest and fixed schema") {
  const auto& e = find_problem("eq_weak");
  TrainConfig c = desk_config(e, 10);
  c.trace_path = "/tmp/wan_test_trace.csv";
  c.config_digest = 0xabcdef12u;
  MlpSpec us = tiny(2), vs = tiny(2);
  run_wan(e.problem, us, vs, c);
  std::ifstream is(c.trace_path);
  std::string line1, line2;
  std::getline(is, line1);
  std::getline(is, line2);
  CHECK(line1.find("config_digest=") != std::string::npos);
  CHECK(line2 == "iteration,L_int,L_bdry,L_init,total,pairing,test_norm,rel_error,seconds");
  std::remove(c.trace_path.c_str());
}

TEST_CASE("non-finite data aborts with the last good state") {
  PdeProblem p = problems::smooth_poisson(2);
  p.f = [](const Vector& x, Real) { return std::log(x(0) - 0.5); };  // NaN for x0 < 0.5
  p.exact = nullptr;
  const auto& e = find_problem("eq_weak");
  TrainConfig c = desk_config(e, 50);
  MlpSpec us = tiny(2), vs = tiny(2);
  CHECK_THROWS_AS(run_wan(p, us, vs, c), TrainingAbort);
}

TEST_CASE("short run drives the boundary loss down on zero data") {
  // zero-solution oracle: f = 0, g = 0 means u* = 0
  PdeProblem p = problems::smooth_poisson(1);
  p.f = nullptr;
  p.g = [](const Vector&, const Vector&, Real) { return 0.0; };
  p.exact = [](const Vector&, Real) { return 0.0; };
  p.exact_grad = [](const Vector& x, Real) { return Vector(Vector::Zero(x.size())); };
  p.exact_laplacian = [](const Vector&, Real) { return 0.0; };

  TrainConfig c;
  c.K_u = 2;
  c.K_phi = 1;
  c.tau_theta = 0.02;
  c.tau_eta = 0.01;
  c.N_r = 128;
  c.N_b = 2;
  c.alpha = 1e4;
  c.max_iterations = 800;
  c.seed = 5;
  MlpSpec us = tiny(1), vs = tiny(1);
  TrainResult r = run_wan(p, us, vs, c);
  Real first = r.trace.rows.front().loss.L_bdry;
  Real last = r.trace.rows.back().loss.L_bdry;
  INFO("L_bdry " << first << " -> " << last);
  CHECK(last < 1e-6);
  CHECK(last < first);
}

TEST_CASE("semidiscrete driver: structure and zero-data behaviour") {
  PdeProblem p = problems::exp_parabolic_semidiscrete(2, 0.4);
  p.f = nullptr;
  p.h = [](const Vector&, Real) { return 0.0; };
  p.h_grad = [](const Vector& x, Real) { return Vector(Vector::Zero(x.size())); };
  p.g = [](const Vector&, const Vector&, Real) { return 0.0; };
  p.exact = [](const Vector&, Real) { return 0.0; };
  p.exact_grad = [](const Vector& x, Real) { return Vector(Vector::Zero(x.size())); };
  p.exact_laplacian = [](const Vector&, Real) { return 0.0; };
  p.exact_dt = [](const Vector&, Real) { return 0.0; };

  TrainConfig c;
  c.K_u = 2;
  c.K_phi = 1;
  c.tau_theta = 0.05;
  c.tau_eta = 0.02;
  c.N_r = 128;
  c.N_b = 8;
  c.alpha = 1e4;
  c.max_iterations = 1500;
  c.seed = 11;
  MlpSpec us = tiny(2), vs = tiny(2);
  SemidiscreteResult r = run_wan_semidiscrete(p, us, vs, c, 2, nullptr);
  REQUIRE(r.step_params.size() == 2);
  REQUIRE(r.step_traces.size() == 2);
  // with zero data every step's solution stays near zero
  for (const auto& tr : r.step_traces) CHECK(tr.rows.back().loss.L_bdry < 1e-5);
  Vector x(2);
  x << 0.2, -0.3;
  CHECK(std::abs(eval_with_input_grad(us, r.step_params.back(), x).value) < 0.05);

  CHECK_THROWS_AS(run_wan_semidiscrete(p, us, vs, c, 0, nullptr), ConfigError);
}

TEST_CASE("pretrained boundary weight vanishes on held-out boundary points") {
  Domain dom = Domain::hyperrectangle(Vector::Zero(2), Vector::Ones(2));
  MlpSpec ws = tiny(2, 12, 2);
  CollocationBatch train_batch = make_batch(dom, 400, 200, 0, 3);
  ParamVector xi = pretrain_w(dom, ws, train_batch, 1e-3, 1200, 0.05, 21);

  CollocationBatch held_out = make_batch(dom, 300, 120, 0, 77);
  TestWeight tw = network_weight(ws, xi);
  Vector wb;
  Matrix gw;
  tw.eval(held_out.boundary, wb, gw);
  INFO("mean |w| on boundary = " << wb.array().abs().mean());
  CHECK(wb.array().abs().mean() < 1e-2);
  Vector wi;
  tw.eval(held_out.interior, wi, gw);
  CHECK((wi.array() > 0.0).all());
}
