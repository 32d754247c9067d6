#pragma once
// Purity-normalised state overlap F(rho, sigma) = tr(rho sigma)^2 / (P(rho) P(sigma)).
// This is not the Uhlmann fidelity. Against a pure target |psi><psi| it evaluates to
// <psi|rho|psi>^2 / P(rho). The shortcut <psi|rho|psi> / P(rho) in fidelity_to_pure
// drops the square; the two agree only when <psi|rho|psi> is 0 or 1. The shortcut
// scores 1 for the maximally mixed state against any psi.

#include <cmath>

#include "ponn/superop.hpp"

namespace ponn {

inline double purity_normalized_fidelity(const CMatrix& rho, const CMatrix& sigma) {
  require_dims(rho.rows() == sigma.rows() && rho.cols() == sigma.cols(), "fidelity arguments differ in dimension");
  const double overlap = (rho * sigma).trace().real();
  const double p_rho = (rho * rho).trace().real();
  const double p_sigma = (sigma * sigma).trace().real();
  if (!(p_rho > 0.0) || !(p_sigma > 0.0)) throw DomainError("fidelity undefined for zero-purity operands");
  return overlap * overlap / (p_rho * p_sigma);
}

inline double fidelity(const DensityState& rho, const DensityState& sigma) {
  return purity_normalized_fidelity(rho.matrix(), sigma.matrix());
}

struct PureFidelity {
  double value = 0.0;
  bool renormalized = false;  // psi was not unit length on input
};

/// <psi|rho|psi> / tr(rho^2).
inline PureFidelity fidelity_to_pure(const CMatrix& rho, const CVector& psi) {
  require_dims(rho.rows() == psi.size(), "state vector does not match density matrix");
  const double norm = psi.norm();
  if (!(norm > 0.0)) throw DomainError("target state vector is zero");
  PureFidelity out;
  out.renormalized = std::abs(norm - 1.0) > 1e-12;
  const CVector unit = psi / norm;
  const double p_rho = (rho * rho).trace().real();
  if (!(p_rho > 0.0)) throw DomainError("fidelity undefined for zero-purity state");
  out.value = (unit.adjoint() * rho * unit)(0, 0).real() / p_rho;
  return out;
}

inline PureFidelity fidelity_to_pure(const DensityState& rho, const CVector& psi) {
  return fidelity_to_pure(rho.matrix(), psi);
}

}  // namespace ponn
