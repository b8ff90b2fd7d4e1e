#pragma once

// Experiment configuration: a single JSON file selects the problem (library
// name or inline definition from a registered closed-form catalog), network
// architectures, and every training hyperparameter. The fully resolved
// configuration is echoed back to disk so a run can be reproduced exactly.

#include "wan/library.hpp"
#include "wan/trainer.hpp"

#include <json.hpp>

#include <optional>

namespace wan {

using Json = nlohmann::json;

enum class RunMode { Static, Spacetime, Semidiscrete };

inline const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::Static: return "static";
    case RunMode::Spacetime: return "spacetime";
    case RunMode::Semidiscrete: return "semidiscrete";
  }
  return "?";
}

struct ExperimentConfig {
  std::string problem_name;  // empty for inline problems
  Json inline_problem;       // null unless inline
  MlpSpec u_spec, v_spec;
  TrainConfig train;
  RunMode mode = RunMode::Static;
  int time_steps = 0;  // semidiscrete
  std::string out_dir = ".";
  std::uint64_t eval_seed = 1234;
};

// ---------------------------------------------------------------------------
// Closed-form catalog for inline problems (no expression parser)
// ---------------------------------------------------------------------------

namespace catalog {

inline ScalarField scalar_field(const Json& j) {
  if (j.is_number()) {
    Real v = j.get<Real>();
    return [v](const Vector&, Real) { return v; };
  }
  if (j.is_string()) {
    std::string name = j.get<std::string>();
    if (name == "zero") return [](const Vector&, Real) { return 0.0; };
    if (name == "one") return [](const Vector&, Real) { return 1.0; };
    // "<library problem>:f|c|h|exact"
    auto pos = name.find(':');
    if (pos != std::string::npos) {
      const auto& e = find_problem(name.substr(0, pos));
      std::string field = name.substr(pos + 1);
      if (field == "f" && e.problem.f) return e.problem.f;
      if (field == "c" && e.problem.c) return e.problem.c;
      if (field == "h" && e.problem.h) return e.problem.h;
      if (field == "exact" && e.problem.exact) return e.problem.exact;
      throw ConfigError("catalog: problem '" + e.name + "' has no scalar field '" + field + "'");
    }
  }
  throw ConfigError("catalog: unknown scalar field " + j.dump());
}

inline BoundaryField boundary_field(const Json& j) {
  if (j.is_number()) {
    Real v = j.get<Real>();
    return [v](const Vector&, const Vector&, Real) { return v; };
  }
  if (j.is_string()) {
    std::string name = j.get<std::string>();
    if (name == "zero") return [](const Vector&, const Vector&, Real) { return 0.0; };
    auto pos = name.find(':');
    if (pos != std::string::npos && name.substr(pos + 1) == "g")
      return find_problem(name.substr(0, pos)).problem.g;
  }
  throw ConfigError("catalog: unknown boundary field " + j.dump());
}

inline Diffusion diffusion(const Json& j) {
  if (j.is_number()) {
    Real v = j.get<Real>();
    Diffusion a;
    a.scalar = [v](const Vector&, Real) { return v; };
    a.scalar_grad = [](const Vector& x, Real) { return Vector(Vector::Zero(x.size())); };
    return a;
  }
  std::string name = j.get<std::string>();
  if (name == "unit") return problems::unit_diffusion();
  if (name == "one_plus_norm_sq") return problems::one_plus_norm_sq_diffusion();
  if (name == "none") return Diffusion{};
  throw ConfigError("catalog: unknown diffusion '" + name + "'");
}

inline Nonlinearity nonlinearity(const Json& j) {
  std::string name = j.get<std::string>();
  if (name == "none") return Nonlinearity{};
  if (name == "half_grad_sq") return problems::half_grad_sq();
  if (name == "minus_u_sq") return problems::minus_u_sq();
  throw ConfigError("catalog: unknown nonlinearity '" + name + "'");
}

inline Domain domain(const Json& j) {
  std::string type = j.at("type").get<std::string>();
  auto vec = [&](const char* key) {
    auto v = j.at(key).get<std::vector<Real>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())).eval();
  };
  if (type == "hyperrectangle") return Domain::hyperrectangle(vec("lo"), vec("hi"));
  if (type == "box_minus_box")
    return Domain::box_minus_box(vec("lo"), vec("hi"), vec("cut_lo"), vec("cut_hi"));
  if (type == "time_product")
    return Domain::time_product(domain(j.at("spatial")), j.at("T").get<Real>());
  throw ConfigError("catalog: unknown domain type '" + type + "'");
}

}  // namespace catalog

inline PdeProblem problem_from_inline(const Json& j) {
  PdeProblem p;
  p.name = j.value("name", std::string("inline"));
  p.domain = catalog::domain(j.at("domain"));
  if (j.contains("diffusion")) p.a = catalog::diffusion(j.at("diffusion"));
  if (j.contains("reaction")) p.c = catalog::scalar_field(j.at("reaction"));
  if (j.contains("nonlinearity")) p.nonlinear = catalog::nonlinearity(j.at("nonlinearity"));
  if (j.contains("source")) p.f = catalog::scalar_field(j.at("source"));
  if (j.contains("boundary_data")) p.g = catalog::boundary_field(j.at("boundary_data"));
  p.bc = j.value("boundary", std::string("dirichlet")) == "neumann" ? BoundaryKind::Neumann
                                                                    : BoundaryKind::Dirichlet;
  if (j.contains("initial_data")) p.h = catalog::scalar_field(j.at("initial_data"));
  if (j.contains("exact")) p.exact = catalog::scalar_field(j.at("exact"));
  if (!p.g) throw ConfigError("inline problem: boundary_data is required");
  return p;
}

// ---------------------------------------------------------------------------
// Network spec <-> JSON
// ---------------------------------------------------------------------------

inline Json spec_to_json(const MlpSpec& s) {
  Json j;
  j["input_dim"] = s.input_dim;
  j["hidden"] = s.hidden_widths;
  std::vector<std::string> acts;
  for (Activation a : s.activations) acts.emplace_back(to_string(a));
  j["activations"] = acts;
  return j;
}

inline MlpSpec spec_from_json(const Json& j, int input_dim) {
  MlpSpec s;
  s.input_dim = j.value("input_dim", input_dim);
  s.hidden_widths = j.at("hidden").get<std::vector<int>>();
  for (const auto& a : j.at("activations"))
    s.activations.push_back(activation_from_string(a.get<std::string>()));
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

inline PdeProblem instantiate_problem(const ExperimentConfig& cfg) {
  if (!cfg.problem_name.empty()) return find_problem(cfg.problem_name).problem;
  return problem_from_inline(cfg.inline_problem);
}

/// Parses and fully resolves a configuration: library defaults are expanded,
/// network architectures filled in, and every invariant validated before any
/// computation.
inline ExperimentConfig resolve_config(const Json& j) {
  ExperimentConfig cfg;
  if (!j.contains("problem")) throw ConfigError("config: missing 'problem'");

  const ProblemLibraryEntry* entry = nullptr;
  PdeProblem problem;
  if (j.at("problem").is_string()) {
    cfg.problem_name = j.at("problem").get<std::string>();
    entry = &find_problem(cfg.problem_name);
    problem = entry->problem;
  } else {
    cfg.inline_problem = j.at("problem");
    problem = problem_from_inline(cfg.inline_problem);
  }

  // mode
  std::string mode = j.value("mode", std::string());
  if (mode.empty()) {
    if (!problem.parabolic())
      mode = "static";
    else
      mode = (entry && entry->time_steps > 0) ? "semidiscrete" : "spacetime";
  }
  if (mode == "static") {
    cfg.mode = RunMode::Static;
    if (problem.parabolic()) throw ConfigError("config: static mode on a parabolic problem");
  } else if (mode == "spacetime") {
    cfg.mode = RunMode::Spacetime;
    if (!problem.parabolic()) throw ConfigError("config: spacetime mode on a static problem");
  } else if (mode == "semidiscrete") {
    cfg.mode = RunMode::Semidiscrete;
    if (!problem.parabolic()) throw ConfigError("config: semidiscrete mode on a static problem");
  } else {
    throw ConfigError("config: unknown mode '" + mode + "'");
  }
  cfg.time_steps = j.value("time_steps", entry ? entry->time_steps : 0);
  if (cfg.mode == RunMode::Semidiscrete && cfg.time_steps < 1)
    throw ConfigError("config: semidiscrete mode needs time_steps >= 1");

  // training defaults from the library entry
  TrainConfig& t = cfg.train;
  if (entry) {
    t.K_u = entry->K_u;
    t.K_phi = entry->K_phi;
    t.tau_theta = entry->tau_theta;
    t.tau_eta = entry->tau_eta;
    t.N_r = entry->N_r;
    t.N_b = entry->N_b;
    t.N_a = entry->N_a;
    t.alpha = entry->alpha;
    t.gamma = entry->gamma;
    t.max_iterations = entry->iterations;
    t.theta_optimizer = optimizer_from_string(entry->theta_optimizer);
    t.eta_optimizer = optimizer_from_string(entry->eta_optimizer);
  }
  if (j.contains("train")) {
    const Json& tj = j.at("train");
    t.K_u = tj.value("K_u", t.K_u);
    t.K_phi = tj.value("K_phi", t.K_phi);
    t.tau_theta = tj.value("tau_theta", t.tau_theta);
    t.tau_eta = tj.value("tau_eta", t.tau_eta);
    t.N_r = tj.value("N_r", t.N_r);
    t.N_b = tj.value("N_b", t.N_b);
    t.N_a = tj.value("N_a", t.N_a);
    t.alpha = tj.value("alpha", t.alpha);
    t.gamma = tj.value("gamma", t.gamma);
    t.max_iterations = tj.value("iterations", t.max_iterations);
    t.resample_every = tj.value("resample_every", t.resample_every);
    if (tj.contains("theta_optimizer"))
      t.theta_optimizer = optimizer_from_string(tj.at("theta_optimizer").get<std::string>());
    if (tj.contains("eta_optimizer"))
      t.eta_optimizer = optimizer_from_string(tj.at("eta_optimizer").get<std::string>());
    t.seed = tj.value("seed", t.seed);
    t.log_every = tj.value("log_every", t.log_every);
    if (tj.contains("u_loss_form")) {
      std::string f = tj.at("u_loss_form").get<std::string>();
      if (f != "log" && f != "direct") throw ConfigError("config: u_loss_form must be log|direct");
      t.u_loss_form = f == "log" ? IntForm::Log : IntForm::Direct;
    }
    if (tj.contains("bdry_form")) {
      std::string f = tj.at("bdry_form").get<std::string>();
      if (f != "squared" && f != "absolute")
        throw ConfigError("config: bdry_form must be squared|absolute");
      t.bdry_form = f == "squared" ? BdryForm::Squared : BdryForm::Absolute;
    }
    t.target_rel_error = tj.value("target_rel_error", t.target_rel_error);
    t.checkpoint_every = tj.value("checkpoint_every", t.checkpoint_every);
  }
  if (problem.parabolic() && !(t.gamma > 0)) t.gamma = t.alpha;

  // networks
  int din = problem.domain.input_dim();
  bool use_elu = entry && entry->u_uses_elu;
  cfg.u_spec = default_u_spec(din, use_elu);
  cfg.v_spec = default_phi_spec(din);
  if (j.contains("networks")) {
    const Json& nj = j.at("networks");
    if (nj.contains("u")) cfg.u_spec = spec_from_json(nj.at("u"), din);
    if (nj.contains("v")) cfg.v_spec = spec_from_json(nj.at("v"), din);
  }
  if (cfg.u_spec.input_dim != din || cfg.v_spec.input_dim != din)
    throw ConfigError("config: network input dimension does not match the problem");

  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.eval_seed = j.value("eval_seed", cfg.eval_seed);

  cfg.train.validate();
  if (cfg.train.N_b > 0 && cfg.train.N_b % problem.domain.face_count() != 0)
    throw ConfigError("config: N_b=" + std::to_string(cfg.train.N_b) +
                      " is not divisible by the face count " +
                      std::to_string(problem.domain.face_count()));
  return cfg;
}

/// The fully resolved configuration, suitable for byte-exact re-runs.
inline Json echo_config(const ExperimentConfig& cfg) {
  Json j;
  if (!cfg.problem_name.empty())
    j["problem"] = cfg.problem_name;
  else
    j["problem"] = cfg.inline_problem;
  j["mode"] = to_string(cfg.mode);
  if (cfg.mode == RunMode::Semidiscrete) j["time_steps"] = cfg.time_steps;
  j["networks"]["u"] = spec_to_json(cfg.u_spec);
  j["networks"]["v"] = spec_to_json(cfg.v_spec);
  const TrainConfig& t = cfg.train;
  Json tj;
  tj["K_u"] = t.K_u;
  tj["K_phi"] = t.K_phi;
  tj["tau_theta"] = t.tau_theta;
  tj["tau_eta"] = t.tau_eta;
  tj["N_r"] = t.N_r;
  tj["N_b"] = t.N_b;
  tj["N_a"] = t.N_a;
  tj["alpha"] = t.alpha;
  tj["gamma"] = t.gamma;
  tj["iterations"] = t.max_iterations;
  tj["resample_every"] = t.resample_every;
  tj["theta_optimizer"] = to_string(t.theta_optimizer);
  tj["eta_optimizer"] = to_string(t.eta_optimizer);
  tj["seed"] = t.seed;
  tj["log_every"] = t.log_every;
  tj["u_loss_form"] = to_string(t.u_loss_form);
  tj["bdry_form"] = to_string(t.bdry_form);
  tj["target_rel_error"] = t.target_rel_error;
  tj["checkpoint_every"] = t.checkpoint_every;
  j["train"] = tj;
  j["out_dir"] = cfg.out_dir;
  j["eval_seed"] = cfg.eval_seed;
  return j;
}

inline std::uint64_t config_digest(const Json& resolved) { return fnv1a(resolved.dump()); }

}  // namespace wan
