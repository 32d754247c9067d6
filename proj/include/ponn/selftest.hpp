#pragma once
// Analytic-oracle checks shared by the `selftest` subcommand and the acceptance
// runner. Each check compares library output against an independent closed form.

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ponn/ocp.hpp"
#include "ponn/pmp.hpp"
#include "ponn/propagator.hpp"
#include "ponn/superop.hpp"
#include "ponn/tfc.hpp"

namespace ponn::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Collects measured-vs-threshold comparisons for one check.
class Ledger {
 public:
  void at_most(const std::string& what, double measured, double bound) {
    record(what, measured, "<=", bound, measured <= bound);
  }
  void at_least(const std::string& what, double measured, double bound) {
    record(what, measured, ">=", bound, measured >= bound);
  }
  void greater(const std::string& what, double measured, double bound) {
    record(what, measured, ">", bound, measured > bound);
  }
  void require(const std::string& what, bool ok) {
    ok_ = ok_ && ok;
    sep();
    out_ << what << (ok ? " ok" : " FAILED");
  }

  bool ok() const { return ok_; }
  std::string text() const { return out_.str(); }

 private:
  void record(const std::string& what, double measured, const char* op, double bound, bool ok) {
    ok_ = ok_ && ok;
    sep();
    out_.precision(3);
    out_ << what << " " << std::scientific << measured << " " << op << " " << bound << (ok ? "" : " FAILED");
    out_ << std::defaultfloat;
  }
  void sep() {
    if (!first_) out_ << "; ";
    first_ = false;
  }

  std::ostringstream out_;
  bool ok_ = true;
  bool first_ = true;
};

inline CheckResult timed(const std::string& name, double budget_seconds, const std::function<void(Ledger&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  Ledger led;
  try {
    body(led);
  } catch (const std::exception& e) {
    led.require(std::string("no exception (") + e.what() + ")", false);
  }
  CheckResult r;
  r.name = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_seconds > 0.0) led.at_most("runtime s", r.seconds, budget_seconds);
  r.passed = led.ok();
  r.detail = led.text();
  return r;
}

inline CMatrix random_complex(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd;
  CMatrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = {nd(gen), nd(gen)};
  return m;
}

inline DensityState random_density(std::mt19937_64& gen, Eigen::Index n) {
  const CMatrix g = random_complex(gen, n, n);
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  return DensityState(CMatrix(0.5 * (rho + rho.adjoint())));
}

inline CMatrix random_hermitian(std::mt19937_64& gen, Eigen::Index n) {
  const CMatrix g = random_complex(gen, n, n);
  return 0.5 * (g + g.adjoint());
}

/// Three-level model with two control channels and two dissipators.
inline LindbladSpec random_model(std::mt19937_64& gen) {
  LindbladSpec s;
  s.drift = CMatrix::Zero(3, 3);
  s.drift.diagonal() << 0.0, 1.3, 2.1;
  s.controls = {random_hermitian(gen, 3), random_hermitian(gen, 3)};
  s.dissipators = {{random_complex(gen, 3, 3), 0.2}, {random_complex(gen, 3, 3), 0.05}};
  return s;
}

// Criterion 1.
inline CheckResult isomorphism() {
  return timed("isomorphism", 1.0, [](Ledger& led) {
    std::mt19937_64 gen(11);
    double round_trip = 0.0;
    for (Eigen::Index n : {2, 3, 4}) {
      const CMatrix m = random_complex(gen, n, n);
      round_trip = std::max(round_trip, (devectorize(vectorize(m)) - m).cwiseAbs().maxCoeff());
      const Vector v = Vector::Random(2 * n * n);
      round_trip = std::max(round_trip, (embed_state(unembed_state(v)).values - v).cwiseAbs().maxCoeff());
    }
    led.at_most("vectorize round trip", round_trip, 0.0);

    // |i><j| -> e_{j n + i}
    const CMatrix e01 = (CMatrix(2, 2) << 0, 1, 0, 0).finished();
    CVector expect = CVector::Zero(4);
    expect(2) = 1.0;
    led.require("|0><1| maps to |1>(x)|0>", vectorize(e01) == expect);

    double rhs_err = 0.0, embed_err = 0.0;
    const LindbladSpec models[2] = {two_level_spec(1.0, 0.1), random_model(gen)};
    for (const LindbladSpec& spec : models) {
      const Eigen::Index n = spec.dim();
      for (int k = 0; k < 20; ++k) {
        const DensityState rho = random_density(gen, n);
        const Vector u = Vector::Random(spec.num_controls()) * 2.0;
        const Liouvillian l = build_liouvillian(spec, u);
        const CVector lhs = vectorize(lindblad_rhs(rho, spec, u));
        rhs_err = std::max(rhs_err, (lhs - l.complex_matrix * vectorize(rho)).cwiseAbs().maxCoeff());

        const CVector v = vectorize(rho);
        embed_err = std::max(embed_err,
                             (unembed_state(l.real_matrix * embed_state(v).values) - l.complex_matrix * v)
                                 .cwiseAbs()
                                 .maxCoeff());
        const double t = 0.7;
        const CVector complex_flow = (l.complex_matrix * cplx(t, 0.0)).exp() * v;
        const CVector real_flow = unembed_state((l.real_matrix * t).exp() * embed_state(v).values);
        embed_err = std::max(embed_err, (complex_flow - real_flow).cwiseAbs().maxCoeff());
      }
    }
    led.at_most("liouvillian vs rhs", rhs_err, 1e-12);
    led.at_most("real embedding", embed_err, 1e-13);
  });
}

/// rho_00(t) for H = E|1><1| + u sigma_x from |1><1|, no dissipation.
inline double rabi_ground_population(double energy, double u, double t) {
  const double omega = std::sqrt(energy * energy + 4.0 * u * u);
  const double s = std::sin(0.5 * omega * t);
  return 4.0 * u * u / (omega * omega) * s * s;
}

// Criterion 2.
inline CheckResult analytic_dynamics() {
  return timed("analytic dynamics", 5.0, [](Ledger& led) {
    const double energy = 1.0, gamma = 0.1, drive = 0.8, duration = 20.0;
    const DensityState rho0 = DensityState::basis(2, 1);
    const Vector tr = trace_functional(2);

    double decay_err = 0.0, drift = 0.0;
    {
      const AffineLiouvillian gen(two_level_spec(energy, gamma));
      const auto u = ControlSignal::constant(Vector::Zero(1));
      // exact (matrix exponential) and RK4 paths
      for (const bool exact : {true, false}) {
        const auto signal = exact ? u : ControlSignal::function([](double) { return Vector(Vector::Zero(1)); }, 1);
        const Trajectory traj = propagate(gen, embed(rho0).values, signal, 0.0, duration, 2000 * 20);
        for (std::size_t k = 0; k < traj.size(); ++k) {
          const CMatrix rho = embedded_to_matrix(traj.states[k].values);
          decay_err = std::max(decay_err, std::abs(rho(1, 1).real() - std::exp(-gamma * traj.times[k])));
          drift = std::max(drift, std::abs(tr.dot(traj.states[k].values) - 1.0));
        }
      }
    }
    led.at_most("decay rho11 vs exp(-gamma t)", decay_err, 1e-8);

    double rabi_err = 0.0;
    {
      const AffineLiouvillian gen(two_level_spec(energy, 0.0));
      Vector uc(1);
      uc << drive;
      for (const bool exact : {true, false}) {
        const auto signal =
            exact ? ControlSignal::constant(uc) : ControlSignal::function([uc](double) { return uc; }, 1);
        const Trajectory traj = propagate(gen, embed(rho0).values, signal, 0.0, duration, 2000 * 20);
        for (std::size_t k = 0; k < traj.size(); ++k) {
          const CMatrix rho = embedded_to_matrix(traj.states[k].values);
          const double p0 = rabi_ground_population(energy, drive, traj.times[k]);
          rabi_err = std::max({rabi_err, std::abs(rho(0, 0).real() - p0), std::abs(rho(1, 1).real() - (1.0 - p0))});
          drift = std::max(drift, std::abs(tr.dot(traj.states[k].values) - 1.0));
        }
      }
    }
    led.at_most("Rabi populations", rabi_err, 1e-6);
    led.at_most("trace drift", drift, 1e-9);
  });
}

// Criterion 3.
inline CheckResult tfc_boundaries() {
  return timed("TFC boundary exactness", 1.0, [](Ledger& led) {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    const ElmBasis basis(60, 1);
    const Eigen::Index d = 8;
    const auto rnd = [&](Eigen::Index r, Eigen::Index c) {
      Matrix m(r, c);
      for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = nd(gen);
      return m;
    };
    double state_err = 0.0, costate_err = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Matrix xs = rnd(60, d), xl = rnd(60, d);
      const Vector v0 = rnd(d, 1), vf = rnd(d, 1), lf = rnd(d, 1);
      state_err = std::max({state_err, (constrained_state(kTau0, xs, basis, v0, vf) - v0).cwiseAbs().maxCoeff(),
                            (constrained_state(kTauF, xs, basis, v0, vf) - vf).cwiseAbs().maxCoeff()});
      costate_err = std::max({costate_err, constrained_costate(kTauF, xl, basis, Vector::Zero(d)).cwiseAbs().maxCoeff(),
                              (constrained_costate(kTauF, xl, basis, lf) - lf).cwiseAbs().maxCoeff()});
    }
    led.at_most("state endpoints", state_err, 1e-12);
    led.at_most("costate terminal", costate_err, 1e-12);
    double partition = 0.0;
    for (int k = 0; k < 1000; ++k) {
      const Switching s = switching(k / 999.0);
      partition = std::max(partition, std::abs(s.omega1 + s.omega2 - 1.0));
    }
    led.at_most("Omega1 + Omega2 - 1", partition, 1e-14);
  });
}

// Criterion 4. Central differences of the Hamiltonian, step 1e-6.
inline CheckResult pmp_gradients() {
  return timed("PMP gradients", 5.0, [](Ledger& led) {
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    const AffineLiouvillian gen2(two_level_spec(1.0, 0.1));
    const SaturationFunction sat(-3.0, 3.0, 10.0);
    const double h = 1e-6;
    double err_costate = 0.0, err_u = 0.0, err_nu = 0.0;
    for (int k = 0; k < 100; ++k) {
      PmpPoint p;
      p.state = Vector::NullaryExpr(8, [&] { return ud(gen); });
      p.costate = Vector::NullaryExpr(8, [&] { return ud(gen); });
      p.control = Vector::Constant(1, 3.0 * ud(gen));
      p.aux = Vector::Constant(1, 3.0 * ud(gen));
      p.beta = Vector::Constant(1, ud(gen));
      p.delta = ud(gen);
      const PmpWeights w{0.1, 0.5 * (1.0 + ud(gen))};
      const auto ham = [&](const PmpPoint& q) { return hamiltonian(q, gen2, w, sat); };

      const Vector rhs = costate_rhs(p, gen2);
      for (Eigen::Index i = 0; i < 8; ++i) {
        PmpPoint a = p, b = p;
        a.state(i) += h;
        b.state(i) -= h;
        err_costate = std::max(err_costate, std::abs(-(ham(a) - ham(b)) / (2 * h) - rhs(i)));
      }
      {
        PmpPoint a = p, b = p;
        a.control(0) += h;
        b.control(0) -= h;
        err_u = std::max(err_u, std::abs((ham(a) - ham(b)) / (2 * h) - stationarity_control(p, gen2, w)(0)));
      }
      {
        PmpPoint a = p, b = p;
        a.aux(0) += h;
        b.aux(0) -= h;
        err_nu = std::max(err_nu, std::abs((ham(a) - ham(b)) / (2 * h) - stationarity_aux(p, w, sat)(0)));
      }
    }
    led.at_most("costate_rhs", err_costate, 1e-6);
    led.at_most("stationarity_u", err_u, 1e-6);
    led.at_most("stationarity_nu", err_nu, 1e-6);
  });
}

// Criterion 5.
inline CheckResult saturation_suite() {
  return timed("saturation", 0.0, [](Ledger& led) {
    const double lo = -3.0, hi = 3.0;
    const SaturationFunction sat(lo, hi, 10.0);
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> wide(-1e3, 1e3);
    bool in_range = true;
    for (int k = 0; k < 10000; ++k) {
      const double nu = k % 2 ? wide(gen) : wide(gen) * 1e-3;
      const double v = sat.value(nu);
      in_range = in_range && v >= lo && v <= hi && std::isfinite(v);
    }
    led.require("range", in_range);
    // Strictly increasing while the logistic is resolvable in double (|s nu| <= 25),
    // non-decreasing beyond, where it rounds to its limits.
    bool increasing = true;
    const double strict = 25.0 / sat.rate();
    double prev = sat.value(-40.0);
    for (int k = 1; k <= 8000; ++k) {
      const double nu = -40.0 + k * 0.01;
      const double v = sat.value(nu);
      increasing = increasing && (std::abs(nu) <= strict ? v > prev && sat.d1(nu) > 0.0 : v >= prev);
      prev = v;
    }
    led.require("monotone", increasing);
    led.at_most("midpoint", std::abs(sat.value(0.0) - 0.5 * (lo + hi)), 1e-15);
    const double far = 50.0 / sat.rate();
    led.at_most("upper asymptote", std::abs(sat.value(far) - hi), 1e-12);
    led.at_most("lower asymptote", std::abs(sat.value(-far) - lo), 1e-12);

    // 10^6-point sweep over |s nu| <= 6, which contains both extrema.
    const int points = 1000000;
    const double half = 6.0 / sat.rate();
    double sweep = 0.0;
    for (int k = 0; k < points; ++k) sweep = std::max(sweep, std::abs(sat.d2(-half + 2.0 * half * k / (points - 1))));
    const double closed = (hi - lo) * sat.rate() * sat.rate() / (6.0 * std::sqrt(3.0));
    led.at_most("max|phi''| closed form vs sweep", std::abs(sat.max_abs_d2() - sweep), 1e-9);
    led.at_most("max|phi''| formula", std::abs(sat.max_abs_d2() - closed), 1e-15);
  });
}

inline std::vector<CheckResult> analytic_suite() {
  return {isomorphism(), analytic_dynamics(), tfc_boundaries(), pmp_gradients(), saturation_suite()};
}

}  // namespace ponn::selftest
