#pragma once
// Pontryagin Hamiltonian with direct adjoining of the purity band and the saturation
// extension u = phi(nu), together with its first- and second-order conditions.
//
//   H = (lambda - 2 delta v)^T L~(u) v + eta |u|^2 + w |nu|^2 + beta . (u - phi(nu))
//
// with delta = mu1 - mu2 the net multiplier on the purity band.

#include <algorithm>
#include <cmath>
#include <limits>

#include "ponn/ocp.hpp"
#include "ponn/superop.hpp"

namespace ponn {

/// Values of all PMP variables at a single instant.
struct PmpPoint {
  Vector state;    // v, embedded density matrix
  Vector costate;  // lambda
  Vector control;  // u, one entry per channel
  Vector aux;      // nu, unconstrained control, one entry per channel
  Vector beta;     // multiplier of u - phi(nu) = 0, one entry per channel
  double delta = 0.0;
};

struct PmpWeights {
  double energy = 0.1;  // eta
  double reg = 1e-1;    // w
};

inline void check_point(const PmpPoint& p, const AffineLiouvillian& gen) {
  const Eigen::Index d = gen.embedded_dim();
  const Eigen::Index m = gen.num_controls();
  require_dims(p.state.size() == d && p.costate.size() == d, "state/costate length does not match the generator");
  require_dims(p.control.size() == m && p.aux.size() == m && p.beta.size() == m,
               "control, aux and beta need one entry per control channel");
}

inline double hamiltonian(const PmpPoint& p, const AffineLiouvillian& gen, const PmpWeights& w,
                          const SaturationFunction& sat) {
  check_point(p, gen);
  const Matrix a = gen.real_at(p.control);
  const Vector q = p.costate - 2.0 * p.delta * p.state;
  double h = q.dot(a * p.state) + w.energy * p.control.squaredNorm() + w.reg * p.aux.squaredNorm();
  for (Eigen::Index l = 0; l < p.control.size(); ++l) h += p.beta(l) * (p.control(l) - sat.value(p.aux(l)));
  return h;
}

/// -dH/dv = -L~^T lambda + 2 delta (L~ + L~^T) v.
inline Vector costate_rhs(const PmpPoint& p, const AffineLiouvillian& gen) {
  check_point(p, gen);
  const Matrix a = gen.real_at(p.control);
  return -a.transpose() * p.costate + 2.0 * p.delta * (a * p.state + a.transpose() * p.state);
}

/// dH/du_l = (lambda - 2 delta v)^T L~_l v + 2 eta u_l + beta_l, per channel.
inline Vector stationarity_control(const PmpPoint& p, const AffineLiouvillian& gen, const PmpWeights& w) {
  check_point(p, gen);
  const Vector q = p.costate - 2.0 * p.delta * p.state;
  Vector r(p.control.size());
  for (Eigen::Index l = 0; l < r.size(); ++l)
    r(l) = q.dot(gen.channel(l).real_matrix * p.state) + 2.0 * w.energy * p.control(l) + p.beta(l);
  return r;
}

/// dH/dnu = 2 w nu - beta phi'(nu).
inline double stationarity_aux(double nu, double beta, double reg_weight, const SaturationFunction& sat) {
  return 2.0 * reg_weight * nu - beta * sat.d1(nu);
}

inline Vector stationarity_aux(const PmpPoint& p, const PmpWeights& w, const SaturationFunction& sat) {
  Vector r(p.aux.size());
  for (Eigen::Index l = 0; l < r.size(); ++l) r(l) = stationarity_aux(p.aux(l), p.beta(l), w.reg, sat);
  return r;
}

/// Free final time: H(t_f) + Gamma = 0.
inline double transversality(const PmpPoint& final_point, const AffineLiouvillian& gen, const PmpWeights& w,
                             const SaturationFunction& sat, double time_weight) {
  return hamiltonian(final_point, gen, w, sat) + time_weight;
}

struct LegendreClebsch {
  bool satisfied = false;
  /// 2w - |beta| max|phi''|; positive iff the (nu, nu) Hessian entry is positive for every nu.
  double margin = 0.0;
};

/// Hessian of H in (u, nu) is diag(2 eta, 2 w - beta phi''(nu)). The sufficient test
/// w > |beta| eps / 2 with eps = max|phi''| makes the second entry positive for all nu.
inline LegendreClebsch legendre_clebsch(double energy_weight, double reg_weight, double beta,
                                        const SaturationFunction& sat) {
  const double margin = 2.0 * reg_weight - std::abs(beta) * sat.max_abs_d2();
  return {energy_weight > 0.0 && margin > 0.0, margin};
}

/// The (nu, nu) Hessian entry at a specific nu.
inline double hessian_aux_entry(double reg_weight, double beta, double nu, const SaturationFunction& sat) {
  return 2.0 * reg_weight - beta * sat.d2(nu);
}

}  // namespace ponn
