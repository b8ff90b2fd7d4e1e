#pragma once

// Experiment driver shared by the CLI and the tests: resolves a config,
// dispatches to the right training loop, and writes the artifact set
// (resolved config echo, trace CSV, checkpoints, final network, summary).

#include "wan/checks.hpp"
#include "wan/config.hpp"

#include <filesystem>
#include <fstream>

namespace wan {

struct RunArtifacts {
  std::string out_dir;
  Real final_rel_error = std::numeric_limits<Real>::quiet_NaN();
  Real wall_seconds = 0;
  std::int64_t iterations = 0;
  std::uint64_t digest = 0;
  TrainTrace trace;           // static/space-time runs
  ParamVector u_params;
  MlpSpec u_spec;
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << content;
}

/// 2-D slice output: CSV (x1, x2, value, mask) plus a compact binary grid
/// (header: u32 n1, u32 n2, f32 lo1, f32 hi1, f32 lo2, f32 hi2, u64 digest;
/// then n1*n2 f64 values, row-major along axis1).
inline void write_slice_files(const std::string& prefix, const SliceGrid& g,
                              std::uint64_t digest) {
  {
    std::ofstream os(prefix + ".csv");
    if (!os) throw IoError("cannot open slice csv for writing");
    os << "# config_digest=" << hex64(digest) << "\n";
    os << "x1,x2,value,mask\n";
    char buf[256];
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        Real x1 = g.lo1 + (i + 0.5) * (g.hi1 - g.lo1) / g.n1;
        Real x2 = g.lo2 + (j + 0.5) * (g.hi2 - g.lo2) / g.n2;
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%d\n", x1, x2,
                      g.values[static_cast<size_t>(i) * g.n2 + j],
                      static_cast<int>(g.mask[static_cast<size_t>(i) * g.n2 + j]));
        os << buf;
      }
  }
  {
    std::ofstream os(prefix + ".grid", std::ios::binary);
    auto put = [&](const void* p, size_t n) { os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); };
    std::uint32_t n1 = static_cast<std::uint32_t>(g.n1), n2 = static_cast<std::uint32_t>(g.n2);
    float ext[4] = {static_cast<float>(g.lo1), static_cast<float>(g.hi1),
                    static_cast<float>(g.lo2), static_cast<float>(g.hi2)};
    put(&n1, 4);
    put(&n2, 4);
    put(ext, 16);
    put(&digest, 8);
    put(g.values.data(), sizeof(Real) * g.values.size());
  }
}

/// Runs one configured experiment end to end and writes all artifacts.
inline RunArtifacts solve_experiment(ExperimentConfig cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  PdeProblem problem = instantiate_problem(cfg);

  Json resolved = echo_config(cfg);
  std::uint64_t digest = config_digest(resolved);
  cfg.train.config_digest = digest;
  cfg.train.trace_path = cfg.out_dir + "/trace.csv";
  cfg.train.checkpoint_path = cfg.out_dir + "/checkpoint.bin";
  write_text_file(cfg.out_dir + "/resolved_config.json", resolved.dump(2) + "\n");

  RunArtifacts art;
  art.out_dir = cfg.out_dir;
  art.digest = digest;
  art.u_spec = cfg.u_spec;

  if (cfg.mode == RunMode::Semidiscrete) {
    EvalSet es = build_eval_set(problem.domain.spatial(), cfg.eval_seed);
    SemidiscreteResult r =
        run_wan_semidiscrete(problem, cfg.u_spec, cfg.v_spec, cfg.train, cfg.time_steps, &es);
    art.u_params = r.step_params.back();
    // the last step's error is measured against u*(., T)
    if (problem.has_exact() && !r.step_errors.empty())
      art.final_rel_error = r.step_errors.back();
    std::int64_t iters = 0;
    Real secs = 0;
    for (const auto& tr : r.step_traces) {
      if (!tr.rows.empty()) {
        iters += tr.rows.back().iteration;
        secs += tr.rows.back().seconds;
      }
    }
    art.iterations = iters;
    art.wall_seconds = secs;
  } else {
    EvalSet es = build_eval_set(problem.domain, cfg.eval_seed);
    cache_exact_values(es, problem);
    const EvalSet* esp = problem.has_exact() ? &es : nullptr;
    TrainResult r = cfg.mode == RunMode::Spacetime
                        ? run_wan_spacetime(problem, cfg.u_spec, cfg.v_spec, cfg.train, esp)
                        : run_wan(problem, cfg.u_spec, cfg.v_spec, cfg.train, esp);
    art.u_params = r.u_params;
    art.final_rel_error = r.final_rel_error;
    art.iterations = r.final_state.iteration;
    art.wall_seconds = r.final_state.elapsed_seconds;
    art.trace = std::move(r.trace);
  }

  save_network(cfg.out_dir + "/u_final.net", cfg.u_spec, art.u_params);
  Json summary;
  summary["problem"] = cfg.problem_name.empty() ? "inline" : cfg.problem_name;
  summary["mode"] = to_string(cfg.mode);
  summary["final_rel_error"] = art.final_rel_error;
  summary["wall_seconds"] = art.wall_seconds;
  summary["iterations"] = art.iterations;
  summary["config_digest"] = hex64(digest);
  write_text_file(cfg.out_dir + "/summary.json", summary.dump(2) + "\n");
  return art;
}

}  // namespace wan
