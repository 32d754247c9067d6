#pragma once
// Reference integrator for the embedded linear system d/dt v = L~(u(t)) v.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "ponn/superop.hpp"

namespace ponn {

/// Control input for the propagator. Piecewise-constant signals hold values(k, :) on
/// [grid(k), grid(k+1)) and the last row beyond the final breakpoint.
class ControlSignal {
 public:
  enum class Kind { constant, piecewise_constant, function };
  using Function = std::function<Vector(double)>;

  static ControlSignal constant(Vector u) {
    ControlSignal s(Kind::constant);
    s.values_ = u.transpose();
    s.check_finite();
    return s;
  }

  static ControlSignal piecewise(std::vector<double> grid, Matrix values) {
    require_dims(!grid.empty() && static_cast<Eigen::Index>(grid.size()) == values.rows(),
                 "piecewise control needs one row of values per breakpoint");
    for (std::size_t k = 1; k < grid.size(); ++k)
      if (!(grid[k] > grid[k - 1])) throw DomainError("control grid must be strictly increasing");
    ControlSignal s(Kind::piecewise_constant);
    s.grid_ = std::move(grid);
    s.values_ = std::move(values);
    s.check_finite();
    return s;
  }

  /// Smooth control evaluated on demand (e.g. a trained feature expansion).
  static ControlSignal function(Function fn, Eigen::Index channels) {
    ControlSignal s(Kind::function);
    s.fn_ = std::move(fn);
    s.channels_ = channels;
    return s;
  }

  Kind kind() const { return kind_; }
  Eigen::Index channels() const { return kind_ == Kind::function ? channels_ : values_.cols(); }
  const std::vector<double>& grid() const { return grid_; }

  Vector at(double t) const {
    switch (kind_) {
      case Kind::constant:
        return values_.row(0).transpose();
      case Kind::piecewise_constant: {
        auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
        const auto k = it == grid_.begin() ? 0 : static_cast<Eigen::Index>(it - grid_.begin()) - 1;
        return values_.row(k).transpose();
      }
      case Kind::function: {
        Vector u = fn_(t);
        if (!u.allFinite()) throw DomainError("control signal is not finite at t = " + std::to_string(t));
        return u;
      }
    }
    return {};
  }

 private:
  explicit ControlSignal(Kind kind) : kind_(kind) {}

  void check_finite() const {
    if (!values_.allFinite()) throw DomainError("control values must be finite");
  }

  Kind kind_;
  std::vector<double> grid_;
  Matrix values_;
  Function fn_;
  Eigen::Index channels_ = 0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<EmbeddedState> states;
  std::vector<Vector> controls;

  std::size_t size() const { return times.size(); }
};

struct PropagatorOptions {
  /// Fixed steps per unit time used when the caller asks for `steps = 0`.
  double steps_per_unit_time = 2000.0;
};

namespace detail {

inline Vector rk4_step(const AffineLiouvillian& gen, const ControlSignal& u, double t, double h, const Vector& v) {
  const Matrix a0 = gen.real_at(u.at(t));
  const Matrix ah = gen.real_at(u.at(t + 0.5 * h));
  const Matrix a1 = gen.real_at(u.at(t + h));
  const Vector k1 = a0 * v;
  const Vector k2 = ah * (v + 0.5 * h * k1);
  const Vector k3 = ah * (v + 0.5 * h * k2);
  const Vector k4 = a1 * (v + h * k3);
  return v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Exact advance over [t, t+h] for piecewise-constant input, splitting at breakpoints.
inline Vector exact_step(const AffineLiouvillian& gen, const ControlSignal& u, double t, double h, const Vector& v) {
  std::vector<double> cuts{t};
  if (u.kind() == ControlSignal::Kind::piecewise_constant)
    for (double g : u.grid())
      if (g > t && g < t + h) cuts.push_back(g);
  cuts.push_back(t + h);
  Vector out = v;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double dt = cuts[k + 1] - cuts[k];
    const Matrix step = (gen.real_at(u.at(cuts[k])) * dt).exp();
    out = step * out;
  }
  return out;
}

}  // namespace detail

/// Integrate from v0 on [t0, tf] with `steps` uniform output steps. Constant and
/// piecewise-constant controls are advanced with exact matrix exponentials; function
/// controls with classical RK4.
inline Trajectory propagate(const AffineLiouvillian& gen, const Vector& v0, const ControlSignal& u, double t0,
                            double tf, int steps) {
  if (!(tf > t0) || !std::isfinite(t0) || !std::isfinite(tf)) throw DomainError("propagation interval must satisfy t0 < tf");
  if (steps < 1) throw DomainError("propagation needs at least one step");
  require_dims(v0.size() == gen.embedded_dim(), "initial state does not match the generator dimension");
  require_dims(u.channels() == gen.num_controls(), "control signal has the wrong number of channels");

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(steps) + 1);
  const double h = (tf - t0) / steps;
  Vector v = v0;
  const bool exact = u.kind() != ControlSignal::Kind::function;
  Matrix constant_step;
  if (u.kind() == ControlSignal::Kind::constant) constant_step = (gen.real_at(u.at(t0)) * h).exp();

  for (int k = 0; k <= steps; ++k) {
    const double t = (k == steps) ? tf : t0 + k * h;
    traj.times.push_back(t);
    traj.states.push_back({v});
    traj.controls.push_back(u.at(t));
    if (k == steps) break;
    if (u.kind() == ControlSignal::Kind::constant)
      v = constant_step * v;
    else if (exact)
      v = detail::exact_step(gen, u, t, h, v);
    else
      v = detail::rk4_step(gen, u, t, h, v);
  }
  return traj;
}

inline Trajectory propagate(const LindbladSpec& spec, const DensityState& rho0, const ControlSignal& u, double t0,
                            double tf, int steps, const PropagatorOptions& opts = {}) {
  if (steps == 0) steps = std::max(1, static_cast<int>(std::ceil(opts.steps_per_unit_time * (tf - t0))));
  return propagate(AffineLiouvillian(spec), embed(rho0).values, u, t0, tf, steps);
}

class DegenerateKernelError : public std::runtime_error {
 public:
  DegenerateKernelError(Eigen::Index kernel_dim, const std::string& what)
      : std::runtime_error(what), kernel_dim_(kernel_dim) {}
  Eigen::Index kernel_dim() const { return kernel_dim_; }

 private:
  Eigen::Index kernel_dim_;
};

/// Stationary state of the Liouvillian at constant control, when unique.
/// Throws DegenerateKernelError when the numerical kernel is not one-dimensional.
inline DensityState steady_state(const LindbladSpec& spec, const Vector& u, double rank_tol = 1e-10) {
  const Liouvillian gen = build_liouvillian(spec, u);
  Eigen::JacobiSVD<CMatrix> svd(gen.complex_matrix, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double scale = std::max(1.0, s(0));
  Eigen::Index kernel = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) <= rank_tol * scale) ++kernel;
  if (kernel != 1)
    throw DegenerateKernelError(kernel, "Liouvillian kernel has dimension " + std::to_string(kernel) + ", expected 1");
  CMatrix rho = devectorize(svd.matrixV().col(s.size() - 1));
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return DensityState(std::move(rho));
}

}  // namespace ponn
