#pragma once
// Command-line front end. Lives in a header so tests can drive it in-process.
//
// Exit codes: 0 success, 1 config or input error, 2 solve did not converge (artifacts
// are still written), 3 a selftest or audit check failed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ponn/config.hpp"
#include "ponn/io.hpp"
#include "ponn/selftest.hpp"
#include "ponn/solver.hpp"

namespace ponn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNotConverged = 2;
inline constexpr int kExitCheckFailed = 3;

inline constexpr const char* kOutputDirEnv = "PONN_OUTPUT_DIR";

/// Thresholds of the post-solve propagation audit.
inline constexpr double kAuditFidelity = 0.99;
inline constexpr double kAuditBandSlack = 5e-3;

inline std::filesystem::path output_dir(const RunConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output.directory;
}

enum class PropagateMode { drive, decay, both };

/// drive: control on, dissipators removed. decay: control off. both: control and dissipation.
inline Trajectory propagate_mode(const RunConfig& cfg, PropagateMode mode) {
  LindbladSpec model = cfg.problem.lindblad;
  if (mode == PropagateMode::drive) model.dissipators.clear();
  const double level = mode == PropagateMode::decay ? 0.0 : cfg.propagation.drive;
  const auto u = ControlSignal::constant(Vector::Constant(model.num_controls(), level));
  const AffineLiouvillian gen(model);
  return propagate(gen, embed(cfg.problem.initial).values, u, 0.0, cfg.propagation.duration,
                   cfg.propagation.samples - 1);
}

inline std::string mode_name(PropagateMode m) {
  switch (m) {
    case PropagateMode::drive: return "drive";
    case PropagateMode::decay: return "decay";
    case PropagateMode::both: return "both";
  }
  return "?";
}

struct SolveArtifacts {
  SolveReport report;
  PropagationAudit audit;
};

class StderrProgress : public TrainObserver {
 public:
  explicit StderrProgress(std::ostream& err) : err_(err) {}
  void on_iteration(std::size_t stage, int iteration, double loss, double damping) override {
    err_ << "stage " << stage << " iter " << iteration << " loss " << io::fmt(loss) << " damping "
         << io::fmt(damping) << '\n';
  }

 private:
  std::ostream& err_;
};

inline SolveArtifacts solve_and_write(const RunConfig& cfg, const std::filesystem::path& dir, std::ostream* progress) {
  const CollocationProblem prob(cfg.problem, cfg.solver);
  StderrProgress obs(progress ? *progress : std::cerr);
  SolveArtifacts out;
  out.report = train(prob, progress ? &obs : nullptr);
  out.audit = audit_by_propagation(prob, out.report.params, cfg.propagation.steps_per_unit_time);

  io::write_file_with(dir / cfg.output.trajectory,
                      [&](std::ostream& os) { io::write_solution_csv(os, prob, out.report.params); });
  io::write_file_with(dir / cfg.output.loss_history,
                      [&](std::ostream& os) { io::write_loss_history_csv(os, out.report); });
  io::write_file_with(dir / "audit_trajectory.csv",
                      [&](std::ostream& os) { io::write_trajectory_csv(os, out.audit.trajectory, cfg.problem.target); });
  io::write_file(dir / cfg.output.report, io::to_json_text(io::report_json(prob, out.report, &out.audit)));
  return out;
}

inline bool audit_passes(const RunConfig& cfg, const PropagationAudit& audit) {
  if (!(audit.terminal_fidelity >= kAuditFidelity)) return false;
  return !cfg.problem.purity_constraints || audit.max_band_violation <= kAuditBandSlack;
}

inline void print_audit(std::ostream& out, const RunConfig& cfg, const PropagationAudit& a) {
  out << "audit: terminal fidelity " << io::fmt(a.terminal_fidelity) << " (>= " << kAuditFidelity << ")";
  if (cfg.problem.purity_constraints)
    out << ", band violation " << io::fmt(a.max_band_violation) << " (<= " << kAuditBandSlack << ")";
  out << ", trace drift " << io::fmt(a.max_trace_drift) << '\n';
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Constrained optimal control of Lindblad systems by functional-connection collocation", "ponn"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "problem config (JSON with comments)")->required();
    sub->add_option("--seed", seed, "override the basis seed from the config");
  };

  auto* prop = app.add_subcommand("propagate", "propagate under a constant control (drive, decay or both)");
  add_common(prop);
  std::string mode = "both";
  prop->add_option("--mode", mode, "drive | decay | both")->check(CLI::IsMember({"drive", "decay", "both"}));

  auto* solve = app.add_subcommand("solve", "solve the optimal control problem");
  add_common(solve);
  bool verbose = false;
  solve->add_flag("-v,--verbose", verbose, "print the loss after every accepted step");

  auto* audit = app.add_subcommand("audit", "re-propagate the control stored in a solve report");
  add_common(audit);
  std::string report_path;
  audit->add_option("-r,--report", report_path, "solve report (default: <output dir>/<report name>)");

  auto* self = app.add_subcommand("selftest", "run the analytic-oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (*self) {
    bool all = true;
    for (const auto& r : selftest::analytic_suite()) {
      out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
      all = all && r.passed;
    }
    return all ? kExitOk : kExitCheckFailed;
  }

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (seed) cfg.solver.seed = *seed;
  const std::filesystem::path dir = output_dir(cfg);

  try {
    if (*prop) {
      const PropagateMode m =
          mode == "drive" ? PropagateMode::drive : mode == "decay" ? PropagateMode::decay : PropagateMode::both;
      const Trajectory traj = propagate_mode(cfg, m);
      const auto path = dir / ("propagate_" + mode_name(m) + ".csv");
      io::write_file_with(path, [&](std::ostream& os) { io::write_trajectory_csv(os, traj, cfg.problem.target); });
      out << "wrote " << path.string() << '\n';
      return kExitOk;
    }

    if (*solve) {
      const SolveArtifacts a = solve_and_write(cfg, dir, verbose ? &err : nullptr);
      const SolveReport& r = a.report;
      out << (r.converged ? "converged" : "NOT converged") << ": loss " << io::fmt(r.final_loss) << ", t_f "
          << io::fmt(r.final_time) << ", " << r.iterations << " iterations\n";
      print_audit(out, cfg, a.audit);
      out << "wrote " << (dir / cfg.output.report).string() << '\n';
      return r.converged ? kExitOk : kExitNotConverged;
    }

    if (*audit) {
      const auto path = report_path.empty() ? dir / cfg.output.report : std::filesystem::path(report_path);
      std::ifstream in(path);
      if (!in) {
        err << "cannot open report " << path.string() << '\n';
        return kExitConfig;
      }
      nlohmann::json report;
      try {
        report = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        err << path.string() << ": " << e.what() << '\n';
        return kExitConfig;
      }
      const CollocationProblem prob(cfg.problem, cfg.solver);
      PinnParams params;
      try {
        params = io::params_from_report(prob, report);
      } catch (const std::exception& e) {
        err << path.string() << ": " << e.what() << '\n';
        return kExitConfig;
      }
      const PropagationAudit a = audit_by_propagation(prob, params, cfg.propagation.steps_per_unit_time);
      io::write_file_with(dir / "audit_trajectory.csv",
                          [&](std::ostream& os) { io::write_trajectory_csv(os, a.trajectory, cfg.problem.target); });
      print_audit(out, cfg, a);
      return audit_passes(cfg, a) ? kExitOk : kExitCheckFailed;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace ponn::cli
