#pragma once
// Functional-connection expressions on the normalised interval [0, 1].
//
// The free functions are random-feature expansions g(tau) = xi^T h(tau) with
// h_l(tau) = tanh(w_l tau + b_l); only the output weights xi are trained. The
// switching functions blend boundary values in so that the boundary conditions hold
// for every xi.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ponn/types.hpp"

namespace ponn {

inline constexpr double kTau0 = 0.0;
inline constexpr double kTauF = 1.0;

/// tau = tau0 + c (t - t0). With tau in [0, 1], the horizon is t_f = t0 + 1 / c.
struct TimeMorph {
  double rate = 1.0;
  double t0 = 0.0;

  double morph(double t) const { return kTau0 + rate * (t - t0); }
  double unmorph(double tau) const { return t0 + (tau - kTau0) / rate; }
  double final_time() const { return unmorph(kTauF); }
};

struct Switching {
  double omega1 = 1.0;
  double omega2 = 0.0;
  double d_omega1 = 0.0;
  double d_omega2 = 0.0;
};

/// Cubic Hermite pair: Omega1 = 1 at tau0, Omega2 = 1 at tau_f, both flat at the ends.
inline Switching switching(double tau, double tau0 = kTau0, double tauf = kTauF) {
  const double len = tauf - tau0;
  const double x = (tau - tau0) / len;
  const double x2 = x * x;
  Switching s;
  s.omega2 = 3.0 * x2 - 2.0 * x2 * x;
  s.omega1 = 1.0 - s.omega2;
  s.d_omega2 = (6.0 * x - 6.0 * x2) / len;
  s.d_omega1 = -s.d_omega2;
  return s;
}

enum class GridKind { chebyshev_lobatto, uniform };

/// N collocation points on [0, 1], endpoints included.
inline std::vector<double> collocation_grid(int points, GridKind kind = GridKind::chebyshev_lobatto) {
  if (points < 2) throw DomainError("collocation grid needs at least two points");
  std::vector<double> tau(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double frac = static_cast<double>(k) / (points - 1);
    tau[static_cast<std::size_t>(k)] =
        kind == GridKind::uniform ? frac : 0.5 * (1.0 - std::cos(std::numbers::pi * frac));
  }
  tau.front() = kTau0;
  tau.back() = kTauF;
  return tau;
}

/// Single hidden layer with frozen random input weights and biases.
class ElmBasis {
 public:
  ElmBasis() = default;

  /// weights ~ U[-weight_bound, weight_bound], biases ~ U[-1, 1], both drawn from `seed`.
  ElmBasis(int neurons, std::uint64_t seed, double weight_bound = 4.0) : seed_(seed) {
    if (neurons < 1) throw DomainError("basis needs at least one neuron");
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> w(-weight_bound, weight_bound);
    std::uniform_real_distribution<double> b(-1.0, 1.0);
    weights_.resize(neurons);
    biases_.resize(neurons);
    for (int l = 0; l < neurons; ++l) weights_(l) = w(gen);
    for (int l = 0; l < neurons; ++l) biases_(l) = b(gen);
  }

  ElmBasis(Vector weights, Vector biases) : weights_(std::move(weights)), biases_(std::move(biases)) {
    require_dims(weights_.size() == biases_.size() && weights_.size() > 0, "basis weights and biases differ in length");
  }

  Eigen::Index size() const { return weights_.size(); }
  std::uint64_t seed() const { return seed_; }
  const Vector& weights() const { return weights_; }
  const Vector& biases() const { return biases_; }

  Vector features(double tau) const { return (weights_ * tau + biases_).array().tanh().matrix(); }

  /// d h / d tau.
  Vector derivatives(double tau) const {
    const Eigen::ArrayXd z = (weights_ * tau + biases_).array().tanh();
    return (weights_.array() * (1.0 - z * z)).matrix();
  }

 private:
  Vector weights_;
  Vector biases_;
  std::uint64_t seed_ = 0;
};

/// Feature rows of the boundary-free part of each constrained expression at one tau.
struct TfcFeatures {
  Vector h, dh;          // plain expansion (controls and multipliers)
  Vector state, dstate;  // h - Omega1 h(tau0) - Omega2 h(tau_f), and its tau-derivative
  Vector costate, dcostate;  // h - Omega2 h(tau_f), and its tau-derivative
  Switching sw;
};

inline TfcFeatures tfc_features(const ElmBasis& basis, double tau) {
  TfcFeatures f;
  f.sw = switching(tau);
  f.h = basis.features(tau);
  f.dh = basis.derivatives(tau);
  const Vector h0 = basis.features(kTau0);
  const Vector hf = basis.features(kTauF);
  f.state = f.h - f.sw.omega1 * h0 - f.sw.omega2 * hf;
  f.dstate = f.dh - f.sw.d_omega1 * h0 - f.sw.d_omega2 * hf;
  f.costate = f.h - f.sw.omega2 * hf;
  f.dcostate = f.dh - f.sw.d_omega2 * hf;
  return f;
}

/// v(tau) = (h - Omega1 h(0) - Omega2 h(1))^T xi + Omega1 v0 + Omega2 vf; xi is L x d.
inline Vector constrained_state(double tau, const Matrix& xi, const ElmBasis& basis, const Vector& v0, const Vector& vf) {
  require_dims(xi.rows() == basis.size() && xi.cols() == v0.size() && v0.size() == vf.size(),
               "state coefficients do not match basis/boundary sizes");
  const TfcFeatures f = tfc_features(basis, tau);
  return xi.transpose() * f.state + f.sw.omega1 * v0 + f.sw.omega2 * vf;
}

/// dv/dt = c dv/dtau.
inline Vector constrained_state_dt(double tau, const Matrix& xi, const ElmBasis& basis, const Vector& v0,
                                   const Vector& vf, double rate) {
  require_dims(xi.rows() == basis.size() && xi.cols() == v0.size() && v0.size() == vf.size(),
               "state coefficients do not match basis/boundary sizes");
  const TfcFeatures f = tfc_features(basis, tau);
  return rate * (xi.transpose() * f.dstate + f.sw.d_omega1 * v0 + f.sw.d_omega2 * vf);
}

/// lambda(tau) = (h - Omega2 h(1))^T xi + Omega2 lambda_f.
inline Vector constrained_costate(double tau, const Matrix& xi, const ElmBasis& basis, const Vector& terminal) {
  require_dims(xi.rows() == basis.size() && xi.cols() == terminal.size(), "costate coefficients do not match basis");
  const TfcFeatures f = tfc_features(basis, tau);
  return xi.transpose() * f.costate + f.sw.omega2 * terminal;
}

inline Vector constrained_costate_dt(double tau, const Matrix& xi, const ElmBasis& basis, const Vector& terminal,
                                     double rate) {
  require_dims(xi.rows() == basis.size() && xi.cols() == terminal.size(), "costate coefficients do not match basis");
  const TfcFeatures f = tfc_features(basis, tau);
  return rate * (xi.transpose() * f.dcostate + f.sw.d_omega2 * terminal);
}

inline double expand_scalar(double tau, const Vector& xi, const ElmBasis& basis) {
  require_dims(xi.size() == basis.size(), "expansion coefficients do not match basis");
  return basis.features(tau).dot(xi);
}

/// How the trainable vector is laid out. Blocks, in order:
///   state (L x d, column-major), costate (L x d), u (L x m), nu (L x m), beta (L x m),
///   mu1 and mu2 roots (L each, only with purity constraints),
///   terminal costate (d, only when it is free), log-rate theta with c = exp(theta).
struct ParamLayout {
  Eigen::Index neurons = 0;
  Eigen::Index dim = 0;       // d = 2 n^2
  Eigen::Index channels = 1;  // m
  bool multipliers = false;
  bool free_terminal_costate = true;

  Eigen::Index state_offset() const { return 0; }
  Eigen::Index costate_offset() const { return neurons * dim; }
  Eigen::Index control_offset() const { return 2 * neurons * dim; }
  Eigen::Index aux_offset() const { return control_offset() + neurons * channels; }
  Eigen::Index beta_offset() const { return aux_offset() + neurons * channels; }
  Eigen::Index mu1_offset() const { return beta_offset() + neurons * channels; }
  Eigen::Index mu2_offset() const { return mu1_offset() + (multipliers ? neurons : 0); }
  Eigen::Index terminal_offset() const { return mu2_offset() + (multipliers ? neurons : 0); }
  Eigen::Index rate_offset() const { return terminal_offset() + (free_terminal_costate ? dim : 0); }
  Eigen::Index size() const { return rate_offset() + 1; }
};

/// Trainable coefficient vector with typed views onto its blocks.
class PinnParams {
 public:
  PinnParams() = default;
  explicit PinnParams(ParamLayout layout) : layout_(layout), values_(Vector::Zero(layout.size())) {}
  PinnParams(ParamLayout layout, Vector values) : layout_(layout), values_(std::move(values)) {
    require_dims(values_.size() == layout_.size(), "parameter vector does not match its layout");
  }

  const ParamLayout& layout() const { return layout_; }
  const Vector& values() const { return values_; }
  Vector& values() { return values_; }

  Eigen::Map<const Matrix> state() const { return block(layout_.state_offset(), layout_.dim); }
  Eigen::Map<const Matrix> costate() const { return block(layout_.costate_offset(), layout_.dim); }
  Eigen::Map<const Matrix> control() const { return block(layout_.control_offset(), layout_.channels); }
  Eigen::Map<const Matrix> aux() const { return block(layout_.aux_offset(), layout_.channels); }
  Eigen::Map<const Matrix> beta() const { return block(layout_.beta_offset(), layout_.channels); }
  Eigen::Map<Matrix> state() { return block(layout_.state_offset(), layout_.dim); }
  Eigen::Map<Matrix> costate() { return block(layout_.costate_offset(), layout_.dim); }
  Eigen::Map<Matrix> control() { return block(layout_.control_offset(), layout_.channels); }
  Eigen::Map<Matrix> aux() { return block(layout_.aux_offset(), layout_.channels); }
  Eigen::Map<Matrix> beta() { return block(layout_.beta_offset(), layout_.channels); }

  Vector mu1_root() const { return segment(layout_.mu1_offset(), layout_.multipliers ? layout_.neurons : 0); }
  Vector mu2_root() const { return segment(layout_.mu2_offset(), layout_.multipliers ? layout_.neurons : 0); }

  Vector terminal_costate() const {
    if (!layout_.free_terminal_costate) return Vector::Zero(layout_.dim);
    return segment(layout_.terminal_offset(), layout_.dim);
  }

  double log_rate() const { return values_(layout_.rate_offset()); }
  double rate() const { return std::exp(log_rate()); }
  void set_rate(double c) {
    if (!(c > 0.0)) throw DomainError("time-morph rate must be positive");
    values_(layout_.rate_offset()) = std::log(c);
  }

 private:
  Eigen::Map<const Matrix> block(Eigen::Index off, Eigen::Index cols) const {
    return {values_.data() + off, layout_.neurons, cols};
  }
  Eigen::Map<Matrix> block(Eigen::Index off, Eigen::Index cols) {
    return {values_.data() + off, layout_.neurons, cols};
  }
  Vector segment(Eigen::Index off, Eigen::Index len) const { return values_.segment(off, len); }

  ParamLayout layout_;
  Vector values_;
};

}  // namespace ponn
