// Command-line front end: solve a configured experiment, run the self-check
// suite, export solution slices from a checkpoint, or reproduce a named
// experiment at desk or paper scale.

#include "wan/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace wan;

namespace {

int cmd_solve(const std::string& config_path, std::uint64_t seed_override, bool has_seed,
              int max_iter_override, const std::string& out_override) {
  Json j;
  {
    std::ifstream is(config_path);
    if (!is) {
      std::cerr << "error: cannot open config '" << config_path << "'\n";
      return 2;
    }
    try {
      is >> j;
    } catch (const std::exception& e) {
      std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
      return 2;
    }
  }
  ExperimentConfig cfg;
  try {
    cfg = resolve_config(j);
  } catch (const std::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << "\n";
    return 2;
  }
  if (has_seed) cfg.train.seed = seed_override;
  if (max_iter_override >= 0) cfg.train.max_iterations = max_iter_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  try {
    RunArtifacts art = solve_experiment(cfg);
    std::cout << "solved: final_rel_error=" << art.final_rel_error
              << " iterations=" << art.iterations << " seconds=" << art.wall_seconds
              << " out=" << art.out_dir << "\n";
    return 0;
  } catch (const TrainingAbort& e) {
    std::cerr << "training aborted: " << e.what() << " (partial artifacts in " << cfg.out_dir
              << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_check(bool inject_fault) {
  std::vector<CheckResult> results = run_check_suite(inject_fault);
  int failed = 0;
  for (const auto& r : results) {
    std::printf("%-5s %-36s observed=%-12.4g threshold=%-10.4g %s\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.observed, r.threshold, r.note.c_str());
    if (!r.pass) ++failed;
  }
  std::printf("%d/%d checks passed\n", static_cast<int>(results.size()) - failed,
              static_cast<int>(results.size()));
  return failed == 0 ? 0 : 1;
}

int cmd_export(const std::string& ckpt_path, const std::string& slice_arg,
               const std::string& axes_arg, int resolution, const std::string& problem_name,
               const std::string& out_prefix) {
  if (!fs::exists(ckpt_path)) {
    std::cerr << "error: checkpoint '" << ckpt_path << "' not found\n";
    return 1;
  }
  try {
    auto [spec, params] = load_network(ckpt_path);

    // problem: explicit name, or the resolved config sitting next to the checkpoint
    std::string pname = problem_name;
    std::uint64_t digest = 0;
    if (pname.empty()) {
      fs::path sibling = fs::path(ckpt_path).parent_path() / "resolved_config.json";
      if (fs::exists(sibling)) {
        std::ifstream is(sibling);
        Json j;
        is >> j;
        if (j.at("problem").is_string()) pname = j.at("problem").get<std::string>();
        digest = config_digest(j);
      }
    }
    if (pname.empty()) {
      std::cerr << "error: no --problem given and no resolved_config.json next to checkpoint\n";
      return 2;
    }
    const PdeProblem& p = find_problem(pname).problem;

    SliceSpec sl;
    sl.resolution = resolution;
    sl.fixed = Vector::Zero(p.domain.input_dim());
    if (!axes_arg.empty()) {
      if (std::sscanf(axes_arg.c_str(), "%d,%d", &sl.axis1, &sl.axis2) != 2) {
        std::cerr << "error: --axes expects 'i,j'\n";
        return 2;
      }
    }
    // slice spec: comma-separated fixed coordinates like "x3=0,x4=0.5"
    std::string arg = slice_arg;
    while (!arg.empty()) {
      auto comma = arg.find(',');
      std::string piece = arg.substr(0, comma);
      arg = comma == std::string::npos ? "" : arg.substr(comma + 1);
      int idx;
      double val;
      if (std::sscanf(piece.c_str(), "x%d=%lf", &idx, &val) == 2 && idx >= 1 &&
          idx <= p.domain.input_dim()) {
        sl.fixed(idx - 1) = val;
      } else if (std::sscanf(piece.c_str(), "t=%lf", &val) == 1 && p.parabolic()) {
        sl.fixed(p.dim()) = val;
      } else {
        std::cerr << "error: bad slice component '" << piece << "'\n";
        return 2;
      }
    }

    SliceGrid g = export_slice(spec, params, p, sl);
    write_slice_files(out_prefix, g, digest);
    if (!g.exact_err.empty()) {
      SliceGrid err = g;
      err.values = g.exact_err;
      err.exact_err.clear();
      write_slice_files(out_prefix + "_err", err, digest);
    }
    std::cout << "exported " << out_prefix << ".csv/.grid"
              << (g.exact_err.empty() ? "" : " and pointwise-error slice") << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_reproduce(const std::string& id, const std::string& scale_arg, const std::string& out_dir,
                  std::uint64_t seed, int max_iter) {
  if (!known_reproduce_id(id)) {
    std::cerr << "error: unknown experiment id '" << id << "'. valid ids:\n";
    for (const auto& s : reproduce_ids()) std::cerr << "  " << s << "\n";
    return 3;
  }
  RunScale scale = scale_arg == "paper" ? RunScale::Paper : RunScale::Desk;
  try {
    ReproduceReport rep = run_reproduce(id, scale, out_dir, seed, max_iter);
    std::printf("%-24s %14s %14s %10s %10s\n", "experiment", "observed_err", "paper_err",
                "seconds", "iters");
    for (const auto& r : rep.rows)
      std::printf("%-24s %14.4g %14.4g %10.1f %10lld\n", r.label.c_str(), r.observed_error,
                  r.paper_error, r.wall_seconds, static_cast<long long>(r.iterations));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wan: weak adversarial network solver for high-dimensional PDEs"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, slice_arg, axes_arg = "0,1", problem_name, out_dir;
  std::string id, scale = "desk", out_prefix = "slice";
  std::uint64_t seed = 0;
  bool inject_fault = false;
  int max_iter = -1, resolution = 100;

  auto* solve = app.add_subcommand("solve", "run a configured experiment");
  solve->add_option("config", config_path, "experiment config JSON")->required();
  auto* seed_opt = solve->add_option("--seed", seed, "override the training seed");
  solve->add_option("--max-iterations", max_iter, "override the iteration budget");
  solve->add_option("--out", out_dir, "override the output directory");

  auto* check = app.add_subcommand("check", "run the self-check oracle suite");
  check->add_flag("--inject-fault", inject_fault,
                  "test fixture: flip a derivative sign so a check fails");

  auto* exp = app.add_subcommand("export", "export 2-D slices from a network checkpoint");
  exp->add_option("checkpoint", ckpt_path, "network checkpoint (u_final.net)")->required();
  exp->add_option("--slice", slice_arg, "fixed coordinates, e.g. 'x3=0,x4=0'");
  exp->add_option("--axes", axes_arg, "free axes as 'i,j' (0-based, default 0,1)");
  exp->add_option("--resolution", resolution, "grid resolution per axis");
  exp->add_option("--problem", problem_name, "library problem name (else read sibling config)");
  exp->add_option("--out", out_prefix, "output path prefix");

  auto* rep = app.add_subcommand("reproduce", "reproduce a named experiment");
  rep->add_option("id", id, "experiment id (see error message for the list)")->required();
  rep->add_option("--scale", scale, "desk|paper")->check(CLI::IsMember({"desk", "paper"}));
  rep->add_option("--out", out_dir, "output directory root");
  rep->add_option("--seed", seed, "training seed");
  rep->add_option("--max-iterations", max_iter, "override the iteration budget");

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed())
    return cmd_solve(config_path, seed, seed_opt->count() > 0, max_iter, out_dir);
  if (check->parsed()) return cmd_check(inject_fault);
  if (exp->parsed())
    return cmd_export(ckpt_path, slice_arg, axes_arg, resolution, problem_name, out_prefix);
  if (rep->parsed())
    return cmd_reproduce(id, scale, out_dir.empty() ? ("reproduce_" + id) : out_dir, seed,
                         max_iter);
  return 2;
}
