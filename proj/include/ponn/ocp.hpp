#pragma once
// Time/energy optimal control problem with purity band and bounded control.

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "ponn/propagator.hpp"
#include "ponn/superop.hpp"

namespace ponn {

struct ControlBounds {
  double lower = -1.0;
  double upper = 1.0;
};

/// phi(nu) = upper - (upper - lower) / (1 + exp(s nu)), s = slope / (upper - lower).
/// Maps the real line onto the open interval (lower, upper), strictly increasing.
class SaturationFunction {
 public:
  SaturationFunction(double lower, double upper, double slope)
      : lower_(lower), upper_(upper), rate_(slope / (upper - lower)) {
    if (!(lower < upper)) throw DomainError("saturation bounds must satisfy lower < upper");
    if (!(slope > 0.0)) throw DomainError("saturation slope constant must be positive");
  }
  SaturationFunction(ControlBounds b, double slope) : SaturationFunction(b.lower, b.upper, slope) {}

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  double rate() const { return rate_; }

  double value(double nu) const {
    const double x = rate_ * nu;
    // 1/(1+e^x) evaluated without overflow on either tail.
    const double tail = x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x));
    return upper_ - (upper_ - lower_) * tail;
  }

  double d1(double nu) const { return span() * rate_ * bell(rate_ * nu); }

  double d2(double nu) const {
    const double x = rate_ * nu;
    return span() * rate_ * rate_ * bell(x) * std::tanh(-0.5 * x);
  }

  /// max over nu of |phi''| = span s^2 / (6 sqrt 3), attained where tanh(x/2) = 1/sqrt 3.
  double max_abs_d2() const { return span() * rate_ * rate_ / (6.0 * std::sqrt(3.0)); }

 private:
  double span() const { return upper_ - lower_; }

  // sigma(x)(1 - sigma(x)) in overflow-safe form.
  static double bell(double x) {
    const double e = std::exp(-std::abs(x));
    return e / ((1.0 + e) * (1.0 + e));
  }

  double lower_;
  double upper_;
  double rate_;
};

/// Everything that defines one transfer problem. The two distinct weights that share a
/// symbol in the literature are kept apart: `purity_floor_fraction` sets the purity band
/// [f P0, P0], `reg_weight` multiplies the integral of nu^2 in the regularised cost.
struct ProblemSpec {
  LindbladSpec lindblad;
  DensityState initial = DensityState::basis(2, 1);
  DensityState target = DensityState::basis(2, 0);
  double time_weight = 1.0;    // Gamma
  double energy_weight = 0.1;  // eta
  ControlBounds bounds{-3.0, 3.0};
  double slope = 10.0;
  double purity_floor_fraction = 0.9;
  bool purity_constraints = true;
  double reg_weight = 1e-1;
  std::vector<double> reg_schedule{1e-1, 1e-2, 1e-3, 1e-4};

  SaturationFunction saturation() const { return {bounds, slope}; }
  double initial_purity() const { return (initial.matrix() * initial.matrix()).trace().real(); }

  void validate() const {
    lindblad.validate();
    require_dims(initial.dim() == lindblad.dim() && target.dim() == lindblad.dim(),
                 "initial/target states do not match the Lindblad model dimension");
    if (lindblad.num_controls() < 1) throw DomainError("at least one control Hamiltonian is required");
    if (!(time_weight > 0.0)) throw DomainError("time weight must be positive");
    if (!(energy_weight > 0.0)) throw DomainError("energy weight must be positive");
    if (!(bounds.lower < bounds.upper)) throw DomainError("control bounds must satisfy lower < upper");
    if (!(slope > 0.0)) throw DomainError("saturation slope must be positive");
    if (!(purity_floor_fraction > 0.0 && purity_floor_fraction < 1.0))
      throw DomainError("purity floor fraction must lie in (0, 1)");
    if (!(reg_weight > 0.0)) throw DomainError("regularisation weight must be positive");
    if (reg_schedule.empty()) throw DomainError("regularisation schedule must not be empty");
    for (std::size_t k = 0; k < reg_schedule.size(); ++k) {
      if (!(reg_schedule[k] > 0.0)) throw DomainError("regularisation schedule entries must be positive");
      if (k > 0 && !(reg_schedule[k] < reg_schedule[k - 1]))
        throw DomainError("regularisation schedule must be strictly decreasing");
    }
  }
};

inline double purity(const Vector& v) { return v.squaredNorm(); }
inline double purity(const EmbeddedState& v) { return purity(v.values); }
inline Vector purity_gradient(const Vector& v) { return 2.0 * v; }
inline Vector purity_gradient(const EmbeddedState& v) { return purity_gradient(v.values); }

inline double purity(const DensityState& rho) { return (rho.matrix() * rho.matrix()).trace().real(); }

/// h = (P - P0, f P0 - P); the state is inside the band iff both entries are <= 0.
inline Eigen::Vector2d state_constraint(const Vector& v, double initial_purity, double floor_fraction) {
  if (!(initial_purity > 0.0 && initial_purity <= 1.0)) throw DomainError("initial purity must lie in (0, 1]");
  const double p = purity(v);
  return {p - initial_purity, floor_fraction * initial_purity - p};
}

inline Eigen::Vector2d state_constraint(const EmbeddedState& v, double initial_purity, double floor_fraction) {
  return state_constraint(v.values, initial_purity, floor_fraction);
}

/// Trapezoidal rule for samples y on a strictly increasing grid t.
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  require_dims(t.size() == y.size(), "quadrature grid and samples differ in length");
  double acc = 0.0;
  for (std::size_t k = 1; k < t.size(); ++k) acc += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
  return acc;
}

/// Gamma t_f + eta int |u|^2 + w int |nu|^2 on the trajectory grid, t_f taken as the
/// duration of the trajectory.
inline double cost(const Trajectory& traj, const std::vector<Vector>& nu_samples, const ProblemSpec& spec,
                   double reg_weight) {
  require_dims(traj.size() >= 2, "cost needs at least two samples");
  require_dims(nu_samples.size() == traj.size(), "nu samples and trajectory are on different grids");
  std::vector<double> u2(traj.size()), nu2(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    u2[k] = traj.controls[k].squaredNorm();
    nu2[k] = nu_samples[k].squaredNorm();
  }
  const double duration = traj.times.back() - traj.times.front();
  return spec.time_weight * duration + spec.energy_weight * trapezoid(traj.times, u2) +
         reg_weight * trapezoid(traj.times, nu2);
}

}  // namespace ponn
