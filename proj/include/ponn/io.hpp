#pragma once
// CSV and JSON artifacts. Every floating-point value is written with %.17g so that
// files round-trip exactly and identical runs produce identical bytes.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ponn/metrics.hpp"
#include "ponn/solver.hpp"

namespace ponn::io {

using ordered_json = nlohmann::ordered_json;

inline std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Column names shared by every trajectory file: t, controls, Re/Im rho_ij (row-major),
/// purity, fidelity.
inline std::vector<std::string> trajectory_columns(Eigen::Index n, Eigen::Index channels) {
  std::vector<std::string> cols{"t"};
  if (channels == 1) {
    cols.emplace_back("u");
  } else {
    for (Eigen::Index l = 0; l < channels; ++l) cols.push_back("u_" + std::to_string(l));
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::string ij = std::to_string(i) + std::to_string(j);
      cols.push_back("re_rho_" + ij);
      cols.push_back("im_rho_" + ij);
    }
  cols.emplace_back("purity");
  cols.emplace_back("fidelity");
  return cols;
}

/// Extra columns of a solved trajectory: costate entries, then nu, beta, mu1, mu2.
inline std::vector<std::string> solution_columns(Eigen::Index n, Eigen::Index channels, Eigen::Index dim) {
  auto cols = trajectory_columns(n, channels);
  for (Eigen::Index k = 0; k < dim; ++k) cols.push_back("lambda_" + std::to_string(k));
  const auto per_channel = [&](const std::string& base) {
    if (channels == 1) {
      cols.push_back(base);
    } else {
      for (Eigen::Index l = 0; l < channels; ++l) cols.push_back(base + "_" + std::to_string(l));
    }
  };
  per_channel("nu");
  per_channel("beta");
  cols.emplace_back("mu1");
  cols.emplace_back("mu2");
  return cols;
}

namespace detail {

inline void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << '\n';
}

inline void write_state_fields(std::ostream& out, double t, const Vector& u, const Vector& v, const CMatrix& target) {
  out << fmt(t);
  for (Eigen::Index l = 0; l < u.size(); ++l) out << ',' << fmt(u(l));
  const CMatrix rho = embedded_to_matrix(v);
  for (Eigen::Index i = 0; i < rho.rows(); ++i)
    for (Eigen::Index j = 0; j < rho.cols(); ++j) out << ',' << fmt(rho(i, j).real()) << ',' << fmt(rho(i, j).imag());
  out << ',' << fmt(purity(v)) << ',' << fmt(purity_normalized_fidelity(rho, target));
}

}  // namespace detail

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const DensityState& target) {
  require_dims(!traj.states.empty(), "trajectory is empty");
  const Eigen::Index n = target.dim();
  const Eigen::Index m = traj.controls.empty() ? 1 : traj.controls.front().size();
  detail::write_header(out, trajectory_columns(n, m));
  for (std::size_t k = 0; k < traj.size(); ++k) {
    detail::write_state_fields(out, traj.times[k], traj.controls[k], traj.states[k].values, target.matrix());
    out << '\n';
  }
}

/// The solved fields at the collocation points.
inline void write_solution_csv(std::ostream& out, const CollocationProblem& prob, const PinnParams& params) {
  const Eigen::Index n = prob.spec().lindblad.dim();
  const Eigen::Index m = prob.layout().channels;
  const Eigen::Index d = prob.layout().dim;
  detail::write_header(out, solution_columns(n, m, d));
  for (const FieldSample& s : prob.samples(params)) {
    detail::write_state_fields(out, s.time, s.control, s.state, prob.spec().target.matrix());
    for (Eigen::Index k = 0; k < d; ++k) out << ',' << fmt(s.costate(k));
    for (Eigen::Index l = 0; l < m; ++l) out << ',' << fmt(s.aux(l));
    for (Eigen::Index l = 0; l < m; ++l) out << ',' << fmt(s.beta(l));
    out << ',' << fmt(s.mu1) << ',' << fmt(s.mu2) << '\n';
  }
}

/// One row per recorded loss: stage, iteration within the stage (0 is the stage's
/// starting point), reg weight, L2 loss.
inline void write_loss_history_csv(std::ostream& out, const SolveReport& report) {
  out << "stage,iteration,reg_weight,loss\n";
  std::size_t pos = 0;
  for (std::size_t s = 0; s < report.stages.size(); ++s) {
    const StageReport& st = report.stages[s];
    for (int it = 0; it <= st.iterations; ++it, ++pos) {
      require_dims(pos < report.loss_history.size(), "loss history shorter than the stage iteration counts");
      out << s << ',' << it << ',' << fmt(st.reg_weight) << ',' << fmt(report.loss_history[pos]) << '\n';
    }
  }
}

namespace detail {

// nlohmann prints the shortest round-trip form; this re-serialises the tree with a
// fixed %.17g for floats and null for non-finite values.
inline void dump_json(std::ostream& out, const ordered_json& j, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case ordered_json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      std::size_t k = 0;
      for (const auto& item : j.items()) {
        out << pad << ordered_json(item.key()).dump() << ": ";
        dump_json(out, item.value(), indent, depth + 1);
        out << (++k < j.size() ? ",\n" : "\n");
      }
      out << close << '}';
      return;
    }
    case ordered_json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      if (flat) {
        out << '[';
        for (std::size_t k = 0; k < j.size(); ++k) {
          if (k) out << ", ";
          dump_json(out, j[k], indent, depth + 1);
        }
        out << ']';
        return;
      }
      out << "[\n";
      for (std::size_t k = 0; k < j.size(); ++k) {
        out << pad;
        dump_json(out, j[k], indent, depth + 1);
        out << (k + 1 < j.size() ? ",\n" : "\n");
      }
      out << close << ']';
      return;
    }
    case ordered_json::value_t::number_float: {
      const double x = j.get<double>();
      out << (std::isfinite(x) ? fmt(x) : "null");
      return;
    }
    default:
      out << j.dump();
  }
}

}  // namespace detail

inline std::string to_json_text(const ordered_json& j) {
  std::ostringstream out;
  detail::dump_json(out, j, 2, 0);
  out << '\n';
  return out.str();
}

inline ordered_json report_json(const CollocationProblem& prob, const SolveReport& report,
                                const PropagationAudit* audit = nullptr) {
  ordered_json j;
  j["converged"] = report.converged;
  j["iterations"] = report.iterations;
  j["final_loss"] = report.final_loss;
  j["final_time"] = report.final_time;
  j["reg_weight"] = report.reg_weight;
  j["max_constraint_violation"] = report.max_constraint_violation;
  j["complementarity_residual"] = report.complementarity_residual;
  j["legendre_clebsch_margin"] = report.lc_margin_min;
  j["legendre_clebsch_pointwise_margin"] = report.lc_pointwise_margin_min;
  j["transversality_residual"] = report.transversality_residual;
  j["cost_nonincreasing"] = report.cost_nonincreasing;
  j["timed_out"] = report.timed_out;
  ordered_json stages = ordered_json::array();
  for (const auto& st : report.stages) {
    ordered_json s;
    s["reg_weight"] = st.reg_weight;
    s["iterations"] = st.iterations;
    s["loss"] = st.loss;
    s["converged"] = st.converged;
    s["final_time"] = st.final_time;
    s["cost"] = st.cost;
    stages.push_back(std::move(s));
  }
  j["stages"] = std::move(stages);
  if (audit) {
    ordered_json a;
    a["terminal_fidelity"] = audit->terminal_fidelity;
    a["max_band_violation"] = audit->max_band_violation;
    a["max_trace_drift"] = audit->max_trace_drift;
    a["samples"] = audit->trajectory.size();
    j["audit"] = std::move(a);
  }
  const ParamLayout& lay = prob.layout();
  ordered_json p;
  p["neurons"] = lay.neurons;
  p["dim"] = lay.dim;
  p["channels"] = lay.channels;
  p["multipliers"] = lay.multipliers;
  p["free_terminal_costate"] = lay.free_terminal_costate;
  p["seed"] = prob.basis().seed();
  p["values"] = std::vector<double>(report.params.values().data(),
                                    report.params.values().data() + report.params.values().size());
  j["params"] = std::move(p);
  return j;
}

/// Restore a parameter vector written by `report_json`; the layout must match `prob`.
inline PinnParams params_from_report(const CollocationProblem& prob, const nlohmann::json& report) {
  const ParamLayout& lay = prob.layout();
  if (!report.contains("params")) throw std::runtime_error("report has no 'params' section");
  const auto& p = report.at("params");
  const auto same = [&](const char* key, auto expected) {
    if (!p.contains(key) || p.at(key).get<decltype(expected)>() != expected)
      throw std::runtime_error(std::string("report params.") + key + " does not match the config");
  };
  same("neurons", static_cast<long long>(lay.neurons));
  same("dim", static_cast<long long>(lay.dim));
  same("channels", static_cast<long long>(lay.channels));
  same("multipliers", lay.multipliers);
  same("free_terminal_costate", lay.free_terminal_costate);
  same("seed", prob.basis().seed());
  const auto values = p.at("values").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != lay.size())
    throw std::runtime_error("report params.values has the wrong length");
  return PinnParams(lay, Eigen::Map<const Vector>(values.data(), lay.size()));
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed while writing " + path.string());
}

template <class Writer>
void write_file_with(const std::filesystem::path& path, Writer&& writer) {
  std::ostringstream buf;
  writer(buf);
  write_file(path, buf.str());
}

}  // namespace ponn::io
