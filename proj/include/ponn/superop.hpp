#pragma once
// Lindblad dynamics in Fock-Liouville space and its real embedding.
//
// Conventions (fixed repo-wide):
//   vec(|i><j|) = |j> (x) |i>, i.e. column stacking, so vec(A X B) = (B^T (x) A) vec(X).
//   embed(v) = [Re v; Im v], and a complex operator L acts on embedded vectors
//   through [[Re L, -Im L], [Im L, Re L]].

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "ponn/types.hpp"

namespace ponn {

namespace tolerance {
inline constexpr double hermitian = 1e-12;
inline constexpr double trace = 1e-10;
inline constexpr double positivity = 1e-9;
}  // namespace tolerance

inline double hermiticity_defect(const CMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// A density operator: Hermitian, trace one, positive semidefinite.
/// Construction validates all three invariants and throws DomainError otherwise.
class DensityState {
 public:
  explicit DensityState(CMatrix matrix) : matrix_(std::move(matrix)) {
    require_dims(matrix_.rows() == matrix_.cols() && matrix_.rows() > 0,
                 "density matrix must be square and non-empty");
    if (std::string why = defect(matrix_); !why.empty()) throw DomainError(why);
  }

  /// |psi><psi| for a (normalised internally) state vector.
  static DensityState pure(const CVector& psi) {
    const double norm = psi.norm();
    if (!(norm > 0.0)) throw DomainError("pure state from zero vector");
    const CVector unit = psi / norm;
    CMatrix m = unit * unit.adjoint();
    m = 0.5 * (m + m.adjoint()).eval();
    return DensityState(std::move(m));
  }

  /// |k><k| in an n-level system.
  static DensityState basis(Eigen::Index n, Eigen::Index k) {
    require_dims(k >= 0 && k < n, "basis index out of range");
    CMatrix m = CMatrix::Zero(n, n);
    m(k, k) = 1.0;
    return DensityState(std::move(m));
  }

  static DensityState maximally_mixed(Eigen::Index n) {
    return DensityState(CMatrix::Identity(n, n) / static_cast<double>(n));
  }

  /// Empty string when `m` is a valid density matrix, otherwise the first violated invariant.
  static std::string defect(const CMatrix& m) {
    if (m.rows() != m.cols()) return "density matrix must be square";
    if (!m.allFinite()) return "density matrix has non-finite entries";
    if (hermiticity_defect(m) > tolerance::hermitian) return "density matrix is not Hermitian";
    if (std::abs(m.trace() - cplx(1.0, 0.0)) > tolerance::trace) return "density matrix trace differs from 1";
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(m, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -tolerance::positivity) return "density matrix is not positive semidefinite";
    return {};
  }

  const CMatrix& matrix() const { return matrix_; }
  Eigen::Index dim() const { return matrix_.rows(); }

 private:
  CMatrix matrix_;
};

/// Real vector of dimension 2n^2: [Re vec(rho); Im vec(rho)].
struct EmbeddedState {
  Vector values;

  Eigen::Index size() const { return values.size(); }
};

struct Dissipator {
  CMatrix op;
  double rate = 0.0;
};

/// H(u) = drift + sum_l u_l controls[l], plus dissipators L_k with rates gamma_k.
struct LindbladSpec {
  CMatrix drift;
  std::vector<CMatrix> controls;
  std::vector<Dissipator> dissipators;

  Eigen::Index dim() const { return drift.rows(); }
  Eigen::Index num_controls() const { return static_cast<Eigen::Index>(controls.size()); }
  Eigen::Index embedded_dim() const { return 2 * dim() * dim(); }

  void validate() const {
    const Eigen::Index n = drift.rows();
    require_dims(n > 0 && drift.cols() == n, "drift Hamiltonian must be square and non-empty");
    if (hermiticity_defect(drift) > tolerance::hermitian) throw DomainError("drift Hamiltonian is not Hermitian");
    CMatrix offdiag = drift;
    offdiag.diagonal().setZero();
    if (offdiag.cwiseAbs().maxCoeff() > tolerance::hermitian)
      throw DomainError("drift Hamiltonian must be diagonal in the energy basis");
    for (std::size_t l = 0; l < controls.size(); ++l) {
      require_dims(controls[l].rows() == n && controls[l].cols() == n,
                   "control Hamiltonian " + std::to_string(l) + " has wrong shape");
      if (hermiticity_defect(controls[l]) > tolerance::hermitian)
        throw DomainError("control Hamiltonian " + std::to_string(l) + " is not Hermitian");
    }
    for (std::size_t k = 0; k < dissipators.size(); ++k) {
      require_dims(dissipators[k].op.rows() == n && dissipators[k].op.cols() == n,
                   "Lindblad operator " + std::to_string(k) + " has wrong shape");
      if (!(dissipators[k].rate >= 0.0) || !std::isfinite(dissipators[k].rate))
        throw DomainError("Lindblad rate " + std::to_string(k) + " must be a finite non-negative number");
    }
  }

  CMatrix hamiltonian(const Vector& u) const {
    require_dims(u.size() == num_controls(), "control vector length does not match the number of control Hamiltonians");
    CMatrix h = drift;
    for (Eigen::Index l = 0; l < u.size(); ++l) h += u(l) * controls[static_cast<std::size_t>(l)];
    return h;
  }
};

/// The two-level atom coupled to vacuum: H = E|1><1| + u(|0><1| + |1><0|), L = |0><1| at rate gamma.
inline LindbladSpec two_level_spec(double energy, double decay_rate) {
  LindbladSpec spec;
  spec.drift = CMatrix::Zero(2, 2);
  spec.drift(1, 1) = energy;
  CMatrix sx = CMatrix::Zero(2, 2);
  sx(0, 1) = 1.0;
  sx(1, 0) = 1.0;
  spec.controls.push_back(sx);
  CMatrix lowering = CMatrix::Zero(2, 2);
  lowering(0, 1) = 1.0;
  spec.dissipators.push_back({lowering, decay_rate});
  return spec;
}

/// -i[H, rho] + sum_k gamma_k (L rho L^+ - 1/2 {L^+ L, rho}).
inline CMatrix lindblad_rhs(const CMatrix& rho, const LindbladSpec& spec, const Vector& u) {
  const Eigen::Index n = spec.dim();
  require_dims(rho.rows() == n && rho.cols() == n, "state dimension does not match the Lindblad model");
  const CMatrix h = spec.hamiltonian(u);
  const cplx i(0.0, 1.0);
  CMatrix out = -i * (h * rho - rho * h);
  for (const auto& d : spec.dissipators) {
    require_dims(d.op.rows() == n && d.op.cols() == n, "Lindblad operator dimension mismatch");
    const CMatrix ldl = d.op.adjoint() * d.op;
    out += d.rate * (d.op * rho * d.op.adjoint() - 0.5 * (ldl * rho + rho * ldl));
  }
  return out;
}

inline CMatrix lindblad_rhs(const DensityState& rho, const LindbladSpec& spec, const Vector& u) {
  return lindblad_rhs(rho.matrix(), spec, u);
}

inline CVector vectorize(const CMatrix& m) {
  return Eigen::Map<const CVector>(m.data(), m.size());
}

inline CMatrix devectorize(const CVector& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  require_dims(n * n == v.size(), "vector length is not a perfect square");
  return Eigen::Map<const CMatrix>(v.data(), n, n);
}

inline CVector vectorize(const DensityState& rho) { return vectorize(rho.matrix()); }

inline Matrix real_embed(const CMatrix& op) {
  const Eigen::Index k = op.rows();
  Matrix out(2 * k, 2 * op.cols());
  out.topLeftCorner(k, op.cols()) = op.real();
  out.topRightCorner(k, op.cols()) = -op.imag();
  out.bottomLeftCorner(k, op.cols()) = op.imag();
  out.bottomRightCorner(k, op.cols()) = op.real();
  return out;
}

inline EmbeddedState embed_state(const CVector& v) {
  EmbeddedState out{Vector(2 * v.size())};
  out.values.head(v.size()) = v.real();
  out.values.tail(v.size()) = v.imag();
  return out;
}

inline CVector unembed_state(const Vector& v) {
  require_dims(v.size() % 2 == 0, "embedded vector must have even length");
  const Eigen::Index k = v.size() / 2;
  CVector out(k);
  out.real() = v.head(k);
  out.imag() = v.tail(k);
  return out;
}

inline CVector unembed_state(const EmbeddedState& v) { return unembed_state(v.values); }

inline EmbeddedState embed(const DensityState& rho) { return embed_state(vectorize(rho)); }

/// Matrix form of an embedded vector (no validation; intermediate iterates need not be states).
inline CMatrix embedded_to_matrix(const Vector& v) { return devectorize(unembed_state(v)); }

/// -i(I (x) H - H^T (x) I) + sum_k gamma_k [L* (x) L - 1/2 I (x) L^+L - 1/2 (L^+L)^T (x) I].
inline CMatrix superoperator(const CMatrix& h, const std::vector<Dissipator>& dissipators) {
  const Eigen::Index n = h.rows();
  const CMatrix id = CMatrix::Identity(n, n);
  const cplx i(0.0, 1.0);
  CMatrix out = -i * (Eigen::kroneckerProduct(id, h).eval() - Eigen::kroneckerProduct(h.transpose(), id).eval());
  for (const auto& d : dissipators) {
    const CMatrix ldl = d.op.adjoint() * d.op;
    out += d.rate * (Eigen::kroneckerProduct(d.op.conjugate(), d.op).eval() -
                     0.5 * Eigen::kroneckerProduct(id, ldl).eval() -
                     0.5 * Eigen::kroneckerProduct(ldl.transpose(), id).eval());
  }
  return out;
}

struct Liouvillian {
  CMatrix complex_matrix;
  Matrix real_matrix;
};

inline Liouvillian make_liouvillian(CMatrix complex_matrix) {
  Matrix real = real_embed(complex_matrix);
  return {std::move(complex_matrix), std::move(real)};
}

/// The generator is affine in the control: L(u) = L_0 + sum_l u_l L_l.
/// Built once per model; `at(u)` is then a weighted sum with no Kronecker products.
class AffineLiouvillian {
 public:
  AffineLiouvillian() = default;

  explicit AffineLiouvillian(const LindbladSpec& spec) {
    spec.validate();
    drift_ = make_liouvillian(superoperator(spec.drift, spec.dissipators));
    for (const auto& hl : spec.controls) channels_.push_back(make_liouvillian(superoperator(hl, {})));
  }

  const Liouvillian& drift() const { return drift_; }
  const Liouvillian& channel(Eigen::Index l) const { return channels_.at(static_cast<std::size_t>(l)); }
  Eigen::Index num_controls() const { return static_cast<Eigen::Index>(channels_.size()); }
  Eigen::Index embedded_dim() const { return drift_.real_matrix.rows(); }

  Liouvillian at(const Vector& u) const {
    require_dims(u.size() == num_controls(), "control vector length does not match the Liouvillian");
    Liouvillian out = drift_;
    for (Eigen::Index l = 0; l < u.size(); ++l) {
      out.complex_matrix += u(l) * channel(l).complex_matrix;
      out.real_matrix += u(l) * channel(l).real_matrix;
    }
    return out;
  }

  Matrix real_at(const Vector& u) const {
    require_dims(u.size() == num_controls(), "control vector length does not match the Liouvillian");
    Matrix out = drift_.real_matrix;
    for (Eigen::Index l = 0; l < u.size(); ++l) out += u(l) * channel(l).real_matrix;
    return out;
  }

 private:
  Liouvillian drift_;
  std::vector<Liouvillian> channels_;
};

inline Liouvillian build_liouvillian(const LindbladSpec& spec, const Vector& u) {
  spec.validate();
  return make_liouvillian(superoperator(spec.hamiltonian(u), spec.dissipators));
}

/// Row vector t with t * embed(vec(rho)) = Re tr(rho).
inline Vector trace_functional(Eigen::Index n) {
  Vector t = Vector::Zero(2 * n * n);
  for (Eigen::Index i = 0; i < n; ++i) t(i * n + i) = 1.0;
  return t;
}

}  // namespace ponn
