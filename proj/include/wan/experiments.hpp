#pragma once

// Reproduction experiments: every library problem by name, plus the
// stability/scalability sweeps. "paper" scale uses the printed settings
// verbatim; "desk" scale shrinks networks, sample counts and iteration
// budgets so a run finishes in minutes on a desktop CPU.
//
// Desk scaling rules: both networks become 4 hidden layers x 20 neurons
// (same activation patterns), N_r is capped at 4000, N_b at 50 per face,
// and the iteration budget at 2000 (the non-smooth problem keeps 10000,
// which is what its singular solution needs to form the center-line kink).

#include "wan/runner.hpp"

namespace wan {

enum class RunScale { Desk, Paper };

inline MlpSpec desk_u_spec(int input_dim, bool use_elu) {
  MlpSpec s;
  s.input_dim = input_dim;
  s.hidden_widths.assign(4, 20);
  Activation mid = use_elu ? Activation::Elu : Activation::Softplus;
  s.activations = {Activation::Tanh, Activation::Tanh, mid, Activation::Tanh};
  return s;
}

inline MlpSpec desk_v_spec(int input_dim) {
  MlpSpec s;
  s.input_dim = input_dim;
  s.hidden_widths.assign(4, 20);
  s.activations = {Activation::Tanh, Activation::Sinc, Activation::Softplus, Activation::Tanh};
  return s;
}

/// Library-problem experiment at the requested scale.
inline ExperimentConfig experiment_config(const std::string& problem_name, RunScale scale,
                                          std::uint64_t seed, const std::string& out_dir) {
  const ProblemLibraryEntry& e = find_problem(problem_name);
  Json j;
  j["problem"] = e.name;
  j["out_dir"] = out_dir;
  Json t;
  t["seed"] = seed;
  if (scale == RunScale::Desk) {
    int faces = e.problem.domain.face_count();
    t["N_r"] = std::min(e.N_r, 4000);
    t["N_b"] = std::min(e.N_b, 50 * faces) / faces * faces;
    if (e.N_a > 0) t["N_a"] = std::min(e.N_a, 50 * faces);
    t["iterations"] = e.name == "eq_weak" ? 10000 : std::min(e.iterations, 2000);
  }
  j["train"] = t;
  ExperimentConfig cfg = resolve_config(j);
  if (scale == RunScale::Desk) {
    cfg.u_spec = desk_u_spec(e.problem.domain.input_dim(), e.u_uses_elu);
    cfg.v_spec = desk_v_spec(e.problem.domain.input_dim());
    if (cfg.mode == RunMode::Semidiscrete) {
      cfg.time_steps = std::min(cfg.time_steps, 4);
      cfg.train.max_iterations = 500;  // per time step
    }
  }
  return cfg;
}

struct ReproduceRow {
  std::string label;
  Real observed_error = std::numeric_limits<Real>::quiet_NaN();
  Real paper_error = std::numeric_limits<Real>::quiet_NaN();
  Real wall_seconds = 0;
  std::int64_t iterations = 0;
};

struct ReproduceReport {
  std::string id;
  std::vector<ReproduceRow> rows;
};

inline const std::vector<std::string>& reproduce_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    v.push_back("nonsmooth");
    for (const auto& e : problem_library())
      if (e.name != "eq_weak") v.push_back(e.name);
    v.push_back("scalability");
    v.push_back("collocation_sweep");
    v.push_back("architecture_sweep");
    return v;
  }();
  return ids;
}

inline bool known_reproduce_id(const std::string& id) {
  for (const auto& s : reproduce_ids())
    if (s == id) return true;
  return false;
}

inline ReproduceReport run_reproduce(const std::string& id, RunScale scale,
                                     const std::string& out_root, std::uint64_t seed,
                                     int max_iterations_override = 0) {
  if (!known_reproduce_id(id)) {
    std::string known;
    for (const auto& s : reproduce_ids()) known += (known.empty() ? "" : ", ") + s;
    throw ConfigError("unknown experiment id '" + id + "'; valid ids: " + known);
  }
  ReproduceReport rep;
  rep.id = id;

  auto run_one = [&](const std::string& problem, const std::string& label,
                     std::function<void(ExperimentConfig&)> tweak = nullptr) {
    ExperimentConfig cfg = experiment_config(problem, scale, seed, out_root + "/" + label);
    if (max_iterations_override > 0) cfg.train.max_iterations = max_iterations_override;
    if (tweak) tweak(cfg);
    RunArtifacts art = solve_experiment(cfg);
    ReproduceRow row;
    row.label = label;
    row.observed_error = art.final_rel_error;
    row.paper_error = find_problem(problem).paper_error;
    row.wall_seconds = art.wall_seconds;
    row.iterations = art.iterations;
    rep.rows.push_back(row);
  };

  if (id == "nonsmooth") {
    run_one("eq_weak", "nonsmooth");
  } else if (id == "scalability") {
    std::vector<int> dims = scale == RunScale::Desk ? std::vector<int>{5, 10, 15}
                                                    : std::vector<int>{5, 10, 15, 20, 25};
    for (int d : dims) {
      run_one("nonl_cube_d" + std::to_string(d), "scalability_d" + std::to_string(d),
              [&](ExperimentConfig& cfg) {
                cfg.train.target_rel_error = scale == RunScale::Desk ? 0.05 : 0.01;
                if (scale == RunScale::Desk) cfg.train.max_iterations = 3000;
              });
    }
  } else if (id == "collocation_sweep") {
    const int d = 5;
    std::vector<int> nrs = scale == RunScale::Desk ? std::vector<int>{500, 4000}
                                                   : std::vector<int>{500, 16000};
    std::vector<int> nbs = {2 * d * 5, 2 * d * 20};
    for (int nr : nrs)
      for (int nb : nbs) {
        std::string label = "sweep_Nr" + std::to_string(nr) + "_Nb" + std::to_string(nb);
        run_one("nonl_cube_d5", label, [&](ExperimentConfig& cfg) {
          cfg.train.N_r = nr;
          cfg.train.N_b = nb;
          if (scale == RunScale::Desk) cfg.train.max_iterations = 1500;
        });
      }
  } else if (id == "architecture_sweep") {
    std::vector<int> layers = scale == RunScale::Desk ? std::vector<int>{3, 5}
                                                      : std::vector<int>{3, 9};
    std::vector<int> widths = {10, 20};
    for (int L : layers)
      for (int w : widths) {
        std::string label = "arch_L" + std::to_string(L) + "_n" + std::to_string(w);
        run_one("nonl_cube_d5", label, [&](ExperimentConfig& cfg) {
          MlpSpec s;
          s.input_dim = cfg.u_spec.input_dim;
          s.hidden_widths.assign(static_cast<size_t>(L), w);
          for (int l = 0; l < L; ++l)
            s.activations.push_back(l % 3 == 2 ? Activation::Softplus : Activation::Tanh);
          cfg.u_spec = s;
          if (scale == RunScale::Desk) cfg.train.max_iterations = 1500;
        });
      }
  } else {
    run_one(id, id);
  }
  return rep;
}

}  // namespace wan
