#pragma once
// Run configuration: JSON with // and /* */ comments. Complex entries are [re, im]
// pairs; a bare number is read as a real entry.

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ponn/ocp.hpp"
#include "ponn/solver.hpp"

namespace ponn {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PropagationSettings {
  double duration = 40.0;
  double drive = 1.0;  // constant control for the drive modes
  double steps_per_unit_time = 2000.0;  // RK4 density for non-constant controls
  int samples = 1001;  // output rows for constant-control runs (propagated exactly)
};

struct OutputSettings {
  std::string directory = "out";
  std::string trajectory = "trajectory.csv";
  std::string report = "report.json";
  std::string loss_history = "loss_history.csv";
};

struct RunConfig {
  ProblemSpec problem;
  SolverConfig solver;
  PropagationSettings propagation;
  OutputSettings output;
};

namespace detail {

using json = nlohmann::json;

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline std::string join_path(const std::string& base, std::size_t idx) {
  return base + "[" + std::to_string(idx) + "]";
}

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw ConfigError("field '" + path + "': " + what);
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number, got " + std::string(j.type_name()));
  return j.get<double>();
}

inline cplx get_complex(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  fail(path, "expected a number or an [re, im] pair");
}

inline CMatrix get_complex_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) fail(join_path(path, 0), "expected a row array");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  CMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto rp = join_path(path, static_cast<std::size_t>(r));
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      fail(rp, "rows must all have " + std::to_string(cols) + " entries");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = get_complex(row[static_cast<std::size_t>(c)], join_path(rp, static_cast<std::size_t>(c)));
  }
  return m;
}

inline CVector get_complex_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array");
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = get_complex(j[k], join_path(path, k));
  return v;
}

// Unknown keys are reported rather than ignored: a misspelt key would otherwise
// silently fall back to a default.
inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) fail(join_path(path, item.key()), "unknown key");
  }
}

template <class T>
void read_opt(const json& obj, const std::string& path, const char* key, T& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  const std::string p = join_path(path, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) fail(p, "expected true or false");
    out = v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) fail(p, "expected a string");
    out = v.get<std::string>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) fail(p, "expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned() || v.get<long long>() >= 0) {
        out = v.get<T>();
        return;
      }
      fail(p, "expected a non-negative integer");
    } else {
      out = v.get<T>();
    }
  } else {
    out = get_number(v, p);
  }
}

inline LindbladSpec read_model(const json& j, const std::string& path) {
  check_keys(j, path, {"two_level", "drift", "controls", "dissipators"});
  if (j.contains("two_level")) {
    const std::string p = join_path(path, "two_level");
    const json& t = j.at("two_level");
    check_keys(t, p, {"energy", "decay_rate"});
    double energy = 1.0, rate = 0.1;
    read_opt(t, p, "energy", energy);
    read_opt(t, p, "decay_rate", rate);
    if (j.contains("drift") || j.contains("controls") || j.contains("dissipators"))
      fail(path, "give either 'two_level' or explicit drift/controls/dissipators, not both");
    return two_level_spec(energy, rate);
  }
  if (!j.contains("drift")) fail(join_path(path, "drift"), "missing");
  LindbladSpec spec;
  spec.drift = get_complex_matrix(j.at("drift"), join_path(path, "drift"));
  if (j.contains("controls")) {
    const std::string p = join_path(path, "controls");
    if (!j.at("controls").is_array()) fail(p, "expected an array of matrices");
    for (std::size_t k = 0; k < j.at("controls").size(); ++k)
      spec.controls.push_back(get_complex_matrix(j.at("controls")[k], join_path(p, k)));
  }
  if (j.contains("dissipators")) {
    const std::string p = join_path(path, "dissipators");
    if (!j.at("dissipators").is_array()) fail(p, "expected an array");
    for (std::size_t k = 0; k < j.at("dissipators").size(); ++k) {
      const std::string dp = join_path(p, k);
      const json& d = j.at("dissipators")[k];
      check_keys(d, dp, {"operator", "rate"});
      if (!d.contains("operator")) fail(join_path(dp, "operator"), "missing");
      if (!d.contains("rate")) fail(join_path(dp, "rate"), "missing");
      spec.dissipators.push_back({get_complex_matrix(d.at("operator"), join_path(dp, "operator")),
                                  get_number(d.at("rate"), join_path(dp, "rate"))});
    }
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
  return spec;
}

// A state is one of: {"basis": k}, {"pure": [c0, c1, ...]}, {"matrix": [[...]]},
// {"maximally_mixed": true}, or {"evolve": {"control": [...], "duration": T}} which
// propagates the initial state under that constant control (targets only).
inline DensityState read_state(const json& j, const std::string& path, const LindbladSpec& model,
                               const DensityState* initial) {
  check_keys(j, path, {"basis", "pure", "matrix", "maximally_mixed", "evolve"});
  if (j.size() != 1) fail(path, "give exactly one of basis, pure, matrix, maximally_mixed, evolve");
  const Eigen::Index n = model.dim();
  try {
    if (j.contains("basis")) {
      const json& b = j.at("basis");
      if (!b.is_number_integer() || b.get<long long>() < 0 || b.get<long long>() >= n)
        fail(join_path(path, "basis"), "expected an integer level in [0, " + std::to_string(n - 1) + "]");
      return DensityState::basis(n, b.get<Eigen::Index>());
    }
    if (j.contains("pure")) {
      const CVector psi = get_complex_vector(j.at("pure"), join_path(path, "pure"));
      if (psi.size() != n) fail(join_path(path, "pure"), "expected " + std::to_string(n) + " amplitudes");
      return DensityState::pure(psi);
    }
    if (j.contains("matrix")) {
      const CMatrix m = get_complex_matrix(j.at("matrix"), join_path(path, "matrix"));
      if (m.rows() != n || m.cols() != n) fail(join_path(path, "matrix"), "expected an n x n matrix");
      return DensityState(m);
    }
    if (j.contains("maximally_mixed")) return DensityState::maximally_mixed(n);
    const std::string ep = join_path(path, "evolve");
    if (!initial) fail(ep, "only allowed for the target state");
    const json& e = j.at("evolve");
    check_keys(e, ep, {"control", "duration"});
    if (!e.contains("control") || !e.contains("duration")) fail(ep, "needs 'control' and 'duration'");
    const json& c = e.at("control");
    if (!c.is_array() || static_cast<Eigen::Index>(c.size()) != model.num_controls())
      fail(join_path(ep, "control"), "expected one value per control channel");
    Vector u(model.num_controls());
    for (std::size_t k = 0; k < c.size(); ++k)
      u(static_cast<Eigen::Index>(k)) = get_number(c[k], join_path(join_path(ep, "control"), k));
    const double duration = get_number(e.at("duration"), join_path(ep, "duration"));
    if (!(duration > 0.0)) fail(join_path(ep, "duration"), "must be positive");
    const AffineLiouvillian gen(model);
    const Vector v = (gen.real_at(u) * duration).exp() * embed(*initial).values;
    const CMatrix m = embedded_to_matrix(v);
    return DensityState(CMatrix(0.5 * (m + m.adjoint())));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

inline void read_problem(const json& j, const std::string& path, ProblemSpec& spec) {
  check_keys(j, path,
             {"initial", "target", "time_weight", "energy_weight", "bounds", "slope", "purity_floor_fraction",
              "purity_constraints", "reg_schedule"});
  if (j.contains("initial")) spec.initial = read_state(j.at("initial"), join_path(path, "initial"), spec.lindblad, nullptr);
  if (j.contains("target"))
    spec.target = read_state(j.at("target"), join_path(path, "target"), spec.lindblad, &spec.initial);
  read_opt(j, path, "time_weight", spec.time_weight);
  read_opt(j, path, "energy_weight", spec.energy_weight);
  if (j.contains("bounds")) {
    const std::string p = join_path(path, "bounds");
    const json& b = j.at("bounds");
    if (!b.is_array() || b.size() != 2) fail(p, "expected [lower, upper]");
    spec.bounds = {get_number(b[0], join_path(p, 0)), get_number(b[1], join_path(p, 1))};
  }
  read_opt(j, path, "slope", spec.slope);
  read_opt(j, path, "purity_floor_fraction", spec.purity_floor_fraction);
  read_opt(j, path, "purity_constraints", spec.purity_constraints);
  if (j.contains("reg_schedule")) {
    const std::string p = join_path(path, "reg_schedule");
    const json& s = j.at("reg_schedule");
    if (!s.is_array() || s.empty()) fail(p, "expected a non-empty array");
    spec.reg_schedule.clear();
    for (std::size_t k = 0; k < s.size(); ++k) spec.reg_schedule.push_back(get_number(s[k], join_path(p, k)));
  }
  spec.reg_weight = spec.reg_schedule.front();
}

inline GridKind parse_grid_kind(const std::string& s, const std::string& path) {
  if (s == "chebyshev_lobatto") return GridKind::chebyshev_lobatto;
  if (s == "uniform") return GridKind::uniform;
  fail(path, "expected 'chebyshev_lobatto' or 'uniform'");
}

inline JacobianMode parse_jacobian_mode(const std::string& s, const std::string& path) {
  if (s == "analytic") return JacobianMode::analytic;
  if (s == "finite_difference") return JacobianMode::finite_difference;
  fail(path, "expected 'analytic' or 'finite_difference'");
}

// 1-based line and column of a byte offset.
inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>") {
  using detail::json;
  json root;
  try {
    root = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: " + e.what());
  }

  RunConfig cfg;
  try {
    detail::check_keys(root, "", {"model", "problem", "basis", "grid", "solver", "propagation", "output"});
    cfg.problem.lindblad = root.contains("model") ? detail::read_model(root.at("model"), "model") : two_level_spec(1.0, 0.1);
    if (root.contains("problem")) detail::read_problem(root.at("problem"), "problem", cfg.problem);

    if (root.contains("basis")) {
      const json& b = root.at("basis");
      detail::check_keys(b, "basis", {"neurons", "seed", "weight_bound"});
      detail::read_opt(b, "basis", "neurons", cfg.solver.neurons);
      detail::read_opt(b, "basis", "seed", cfg.solver.seed);
      detail::read_opt(b, "basis", "weight_bound", cfg.solver.weight_bound);
    }
    if (root.contains("grid")) {
      const json& g = root.at("grid");
      detail::check_keys(g, "grid", {"points", "kind"});
      detail::read_opt(g, "grid", "points", cfg.solver.grid_points);
      std::string kind;
      detail::read_opt(g, "grid", "kind", kind);
      if (!kind.empty()) cfg.solver.grid = detail::parse_grid_kind(kind, "grid.kind");
    }
    if (root.contains("solver")) {
      const json& s = root.at("solver");
      const std::string p = "solver";
      detail::check_keys(s, p,
                         {"tolerance", "max_iterations", "transversality_weight", "ramp_sharpness", "jacobian",
                          "fd_step", "initial_damping", "damping_floor", "damping_ceiling", "line_search_halvings",
                          "initial_final_time", "multiplier_root_init", "free_terminal_costate",
                          "time_limit_seconds"});
      detail::read_opt(s, p, "tolerance", cfg.solver.tolerance);
      detail::read_opt(s, p, "max_iterations", cfg.solver.max_iterations);
      detail::read_opt(s, p, "transversality_weight", cfg.solver.transversality_weight);
      detail::read_opt(s, p, "ramp_sharpness", cfg.solver.ramp_sharpness);
      std::string mode;
      detail::read_opt(s, p, "jacobian", mode);
      if (!mode.empty()) cfg.solver.jacobian = detail::parse_jacobian_mode(mode, "solver.jacobian");
      detail::read_opt(s, p, "fd_step", cfg.solver.fd_step);
      detail::read_opt(s, p, "initial_damping", cfg.solver.initial_damping);
      detail::read_opt(s, p, "damping_floor", cfg.solver.damping_floor);
      detail::read_opt(s, p, "damping_ceiling", cfg.solver.damping_ceiling);
      detail::read_opt(s, p, "line_search_halvings", cfg.solver.max_line_search_halvings);
      detail::read_opt(s, p, "initial_final_time", cfg.solver.initial_final_time);
      detail::read_opt(s, p, "multiplier_root_init", cfg.solver.multiplier_root_init);
      detail::read_opt(s, p, "free_terminal_costate", cfg.solver.free_terminal_costate);
      detail::read_opt(s, p, "time_limit_seconds", cfg.solver.time_limit_seconds);
    }
    if (root.contains("propagation")) {
      const json& s = root.at("propagation");
      detail::check_keys(s, "propagation", {"duration", "drive", "steps_per_unit_time", "samples"});
      detail::read_opt(s, "propagation", "duration", cfg.propagation.duration);
      detail::read_opt(s, "propagation", "drive", cfg.propagation.drive);
      detail::read_opt(s, "propagation", "steps_per_unit_time", cfg.propagation.steps_per_unit_time);
      detail::read_opt(s, "propagation", "samples", cfg.propagation.samples);
    }
    if (root.contains("output")) {
      const json& s = root.at("output");
      detail::check_keys(s, "output", {"directory", "trajectory", "report", "loss_history"});
      detail::read_opt(s, "output", "directory", cfg.output.directory);
      detail::read_opt(s, "output", "trajectory", cfg.output.trajectory);
      detail::read_opt(s, "output", "report", cfg.output.report);
      detail::read_opt(s, "output", "loss_history", cfg.output.loss_history);
    }
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }

  const auto check = [&](bool ok, const char* field, const char* what) {
    if (!ok) throw ConfigError(source + ": field '" + std::string(field) + "': " + what);
  };
  check(cfg.solver.neurons >= 1, "basis.neurons", "must be at least 1");
  check(cfg.solver.weight_bound > 0.0, "basis.weight_bound", "must be positive");
  check(cfg.solver.grid_points >= 2, "grid.points", "must be at least 2");
  check(cfg.solver.tolerance > 0.0, "solver.tolerance", "must be positive");
  check(cfg.solver.max_iterations >= 0, "solver.max_iterations", "must be non-negative");
  check(cfg.solver.fd_step > 0.0, "solver.fd_step", "must be positive");
  check(cfg.solver.initial_damping >= 0.0, "solver.initial_damping", "must be non-negative");
  check(cfg.solver.damping_floor >= 0.0, "solver.damping_floor", "must be non-negative");
  check(cfg.solver.initial_final_time > 0.0, "solver.initial_final_time", "must be positive");
  check(cfg.solver.time_limit_seconds >= 0.0, "solver.time_limit_seconds", "must be non-negative");
  check(cfg.solver.ramp_sharpness > 0.0, "solver.ramp_sharpness", "must be positive");
  check(cfg.propagation.duration > 0.0, "propagation.duration", "must be positive");
  check(cfg.propagation.samples >= 2, "propagation.samples", "must be at least 2");
  check(cfg.propagation.steps_per_unit_time > 0.0, "propagation.steps_per_unit_time", "must be positive");
  try {
    cfg.problem.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source + ": problem: " + e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

}  // namespace ponn
