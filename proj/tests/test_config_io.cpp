#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ponn/config.hpp"
#include "ponn/io.hpp"

using namespace ponn;

namespace {

std::string source_path(const std::string& rel) { return std::string(PONN_SOURCE_DIR) + "/" + rel; }

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST(Config, ShippedDefaultsMatchCodeDefaults) {
  const RunConfig c = load_config(source_path("configs/two_level.json"));
  const RunConfig d = parse_config("{}");
  EXPECT_EQ(c.solver.neurons, d.solver.neurons);
  EXPECT_EQ(c.solver.grid_points, d.solver.grid_points);
  EXPECT_EQ(c.solver.tolerance, d.solver.tolerance);
  EXPECT_EQ(c.solver.damping_floor, d.solver.damping_floor);
  EXPECT_EQ(c.problem.reg_schedule, d.problem.reg_schedule);
  EXPECT_EQ(c.problem.bounds.upper, 3.0);
  EXPECT_TRUE(c.problem.purity_constraints);
  EXPECT_EQ(c.problem.initial.matrix(), DensityState::basis(2, 1).matrix());
  EXPECT_EQ(c.output.directory, "out");
}

TEST(Config, UnconstrainedTargetIsEvolvedState) {
  const RunConfig c = load_config(source_path("configs/two_level_unconstrained.json"));
  EXPECT_FALSE(c.problem.purity_constraints);
  const AffineLiouvillian gen(c.problem.lindblad);
  const Vector vf = (gen.real_at(Vector::Constant(1, 1.0)) * 1.0).exp() * embed(c.problem.initial).values;
  EXPECT_LE((c.problem.target.matrix() - embedded_to_matrix(vf)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Config, ComplexEntriesAndExplicitModel) {
  const RunConfig c = parse_config(R"({
    // explicit form of the default model
    "model": {
      "drift": [[0, 0], [0, 1.5]],
      "controls": [[[0, [0, -1]], [[0, 1], 0]]],
      "dissipators": [{"operator": [[0, 1], [0, 0]], "rate": 0.2}]
    },
    "problem": {"initial": {"pure": [1, [0, 1]]}, "target": {"maximally_mixed": true}, "purity_constraints": false}
  })");
  EXPECT_EQ(c.problem.lindblad.controls[0](0, 1), cplx(0.0, -1.0));
  EXPECT_EQ(c.problem.lindblad.dissipators[0].rate, 0.2);
  EXPECT_NEAR(c.problem.initial.matrix()(0, 1).real(), 0.0, 1e-15);
  EXPECT_NEAR(c.problem.initial.matrix()(0, 1).imag(), -0.5, 1e-15);
  EXPECT_DOUBLE_EQ(c.problem.target.matrix()(1, 1).real(), 0.5);
}

TEST(Config, ParseErrorsCarryLineAndColumn) {
  const std::string msg = error_of("{\n  \"grid\": {\n    \"points\": 80,,\n  }\n}");
  EXPECT_NE(msg.find("cfg.json:3:"), std::string::npos) << msg;
}

TEST(Config, FieldErrorsNameThePath) {
  EXPECT_NE(error_of(R"({"grid": {"points": "many"}})").find("grid.points"), std::string::npos);
  EXPECT_NE(error_of(R"({"grid": {"points": 1}})").find("field 'grid.points'"), std::string::npos);
  EXPECT_NE(error_of(R"({"solver": {"tolerence": 1e-6}})").find("tolerence"), std::string::npos);
  EXPECT_NE(error_of(R"({"grid": {"kind": "random"}})").find("grid.kind"), std::string::npos);
  EXPECT_NE(error_of(R"({"problem": {"time_weight": -1}})").find("problem"), std::string::npos);
  EXPECT_NE(error_of(R"({"problem": {"initial": {"evolve": {"control": [1], "duration": 1}}}})"), "");
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Format, RoundTripsDoubles) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) EXPECT_EQ(std::stod(io::fmt(x)), x);
  EXPECT_EQ(io::fmt(0.1), "0.10000000000000001");
  EXPECT_EQ(io::fmt(NAN), "nan");
}

TEST(Columns, TrajectoryLayout) {
  const auto cols = io::trajectory_columns(2, 1);
  const std::vector<std::string> expect{"t",         "u",         "re_rho_00", "im_rho_00", "re_rho_01", "im_rho_01",
                                        "re_rho_10", "im_rho_10", "re_rho_11", "im_rho_11", "purity",    "fidelity"};
  EXPECT_EQ(cols, expect);
  EXPECT_EQ(io::trajectory_columns(3, 2)[2], "u_1");
  const auto sol = io::solution_columns(2, 1, 8);
  EXPECT_EQ(sol.size(), 12u + 8u + 4u);
  EXPECT_EQ(sol[12], "lambda_0");
  EXPECT_EQ(sol.back(), "mu2");
}

TEST(Csv, TrajectoryRowsMatchStates) {
  const auto spec = two_level_spec(1.0, 0.1);
  const Trajectory t =
      propagate(spec, DensityState::basis(2, 1), ControlSignal::constant(Vector::Constant(1, 0.5)), 0.0, 2.0, 4);
  std::ostringstream os;
  io::write_trajectory_csv(os, t, DensityState::basis(2, 0));
  const auto rows = lines(os.str());
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(split(rows[0]), io::trajectory_columns(2, 1));
  for (std::size_t k = 0; k < t.size(); ++k) {
    const auto cells = split(rows[k + 1]);
    ASSERT_EQ(cells.size(), 12u);
    const CMatrix rho = embedded_to_matrix(t.states[k].values);
    EXPECT_EQ(std::stod(cells[0]), t.times[k]);
    EXPECT_EQ(std::stod(cells[1]), 0.5);
    EXPECT_EQ(std::stod(cells[4]), rho(0, 1).real());
    EXPECT_EQ(std::stod(cells[5]), rho(0, 1).imag());
    EXPECT_EQ(std::stod(cells[8]), rho(1, 1).real());
    EXPECT_NEAR(std::stod(cells[10]), (rho * rho).trace().real(), 1e-15);
  }
}

namespace {

struct SmallSolve {
  CollocationProblem prob;
  SolveReport report;

  static ProblemSpec spec() {
    ProblemSpec s;
    s.lindblad = two_level_spec(1.0, 0.1);
    s.reg_schedule = {1e-1, 1e-2};
    return s;
  }
  static SolverConfig config() {
    SolverConfig c;
    c.grid_points = 10;
    c.neurons = 6;
    c.max_iterations = 3;
    return c;
  }
  SmallSolve() : prob(spec(), config()), report(train(prob)) {}
};

}  // namespace

TEST(Csv, SolutionAndLossHistory) {
  const SmallSolve s;
  std::ostringstream sol;
  io::write_solution_csv(sol, s.prob, s.report.params);
  const auto rows = lines(sol.str());
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(split(rows[0]), io::solution_columns(2, 1, 8));
  const auto last = split(rows.back());
  EXPECT_EQ(std::stod(last[0]), 1.0 / s.report.params.rate());
  EXPECT_EQ(std::stod(last[2]), 1.0);  // state pinned to the target |0><0| at the last point

  std::ostringstream hist;
  io::write_loss_history_csv(hist, s.report);
  const auto h = lines(hist.str());
  EXPECT_EQ(h[0], "stage,iteration,reg_weight,loss");
  ASSERT_EQ(h.size(), s.report.loss_history.size() + 1);
  EXPECT_EQ(split(h[1])[0], "0");
  EXPECT_EQ(split(h[1])[1], "0");
  EXPECT_EQ(split(h.back())[0], "1");
  EXPECT_EQ(std::stod(split(h.back())[3]), s.report.loss_history.back());
}

TEST(Json, ReportRoundTripsParameters) {
  const SmallSolve s;
  const std::string text = io::to_json_text(io::report_json(s.prob, s.report));
  const auto j = nlohmann::json::parse(text);
  EXPECT_EQ(j.at("stages").size(), 2u);
  EXPECT_EQ(j.at("final_loss").get<double>(), s.report.final_loss);
  const PinnParams p = io::params_from_report(s.prob, j);
  EXPECT_EQ(p.values(), s.report.params.values());

  auto wrong = j;
  wrong["params"]["seed"] = 99;
  EXPECT_THROW(io::params_from_report(s.prob, wrong), std::runtime_error);
  wrong = j;
  wrong["params"]["values"] = std::vector<double>{1.0};
  EXPECT_THROW(io::params_from_report(s.prob, wrong), std::runtime_error);
}

TEST(Json, NonFiniteBecomesNullAndFloatsUseFullPrecision) {
  io::ordered_json j;
  j["a"] = 0.1;
  j["b"] = std::numeric_limits<double>::infinity();
  j["c"] = std::vector<double>{1.0, 2.5};
  const std::string text = io::to_json_text(j);
  EXPECT_NE(text.find("0.10000000000000001"), std::string::npos) << text;
  EXPECT_NE(text.find("null"), std::string::npos);
  EXPECT_TRUE(nlohmann::json::parse(text).at("b").is_null());
}
