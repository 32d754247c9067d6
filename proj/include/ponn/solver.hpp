#pragma once
// Collocation of the Pontryagin boundary-value problem and its training by damped
// Gauss-Newton (Levenberg-Marquardt) with regularisation continuation.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/SVD>

#include "ponn/metrics.hpp"
#include "ponn/ocp.hpp"
#include "ponn/pmp.hpp"
#include "ponn/propagator.hpp"
#include "ponn/superop.hpp"
#include "ponn/tfc.hpp"

namespace ponn {

enum class JacobianMode { analytic, finite_difference };

struct SolverConfig {
  int grid_points = 80;
  GridKind grid = GridKind::chebyshev_lobatto;
  int neurons = 60;
  std::uint64_t seed = 1;
  double weight_bound = 4.0;

  double tolerance = 1e-6;
  int max_iterations = 500;  // per continuation stage
  double transversality_weight = 1.0;
  double ramp_sharpness = 1e3;

  JacobianMode jacobian = JacobianMode::analytic;
  double fd_step = 1e-7;

  double initial_damping = 1e-12;
  double damping_floor = 1e-30;
  double damping_ceiling = 1e12;
  int max_line_search_halvings = 6;

  double initial_final_time = 1.0;
  /// Initial value of the roots m_i in mu_i = m_i^2; zero would freeze them (zero gradient).
  double multiplier_root_init = 1e-2;
  /// Leave lambda(t_f) as trainable (fixed terminal state) or pin it to zero.
  bool free_terminal_costate = true;
  /// Wall-clock budget for a whole `train` call in seconds; 0 disables it.
  double time_limit_seconds = 0.0;
};

/// C^1 ramp: 0 for h <= 0, k h^2 / 2 on (0, 1/k), h - 1/(2k) beyond.
inline double smooth_ramp(double h, double sharpness) {
  if (h <= 0.0) return 0.0;
  if (h < 1.0 / sharpness) return 0.5 * sharpness * h * h;
  return h - 0.5 / sharpness;
}

inline double smooth_ramp_d1(double h, double sharpness) {
  if (h <= 0.0) return 0.0;
  if (h < 1.0 / sharpness) return sharpness * h;
  return 1.0;
}

/// Named, contiguous blocks of the stacked residual vector.
enum class LossBlock {
  dynamics,
  costate,
  stationarity_u,
  stationarity_nu,
  equality,
  transversality,
  mu1_complementarity,
  mu2_complementarity,
  mu1_feasibility,
  mu2_feasibility,
};

inline constexpr std::array<LossBlock, 10> kLossBlocks{
    LossBlock::dynamics,        LossBlock::costate,
    LossBlock::stationarity_u,  LossBlock::stationarity_nu,
    LossBlock::equality,        LossBlock::transversality,
    LossBlock::mu1_complementarity, LossBlock::mu2_complementarity,
    LossBlock::mu1_feasibility, LossBlock::mu2_feasibility,
};

inline std::string_view block_name(LossBlock b) {
  switch (b) {
    case LossBlock::dynamics: return "dynamics";
    case LossBlock::costate: return "costate";
    case LossBlock::stationarity_u: return "stationarity_u";
    case LossBlock::stationarity_nu: return "stationarity_nu";
    case LossBlock::equality: return "equality";
    case LossBlock::transversality: return "transversality";
    case LossBlock::mu1_complementarity: return "mu1_complementarity";
    case LossBlock::mu2_complementarity: return "mu2_complementarity";
    case LossBlock::mu1_feasibility: return "mu1_feasibility";
    case LossBlock::mu2_feasibility: return "mu2_feasibility";
  }
  return "?";
}

/// Row offsets of each residual block. Per-point blocks are point-major.
struct LossLayout {
  Eigen::Index points = 0, dim = 0, channels = 1;
  bool constrained = false;

  Eigen::Index rows(LossBlock b) const {
    switch (b) {
      case LossBlock::dynamics:
      case LossBlock::costate: return points * dim;
      case LossBlock::stationarity_u:
      case LossBlock::stationarity_nu:
      case LossBlock::equality: return points * channels;
      case LossBlock::transversality: return 1;
      default: return constrained ? points : 0;
    }
  }

  Eigen::Index offset(LossBlock b) const {
    Eigen::Index off = 0;
    for (LossBlock k : kLossBlocks) {
      if (k == b) return off;
      off += rows(k);
    }
    return off;
  }

  Eigen::Index size() const { return offset(LossBlock::mu2_feasibility) + rows(LossBlock::mu2_feasibility); }
};

struct LossVector {
  LossLayout layout;
  Vector values;

  double norm() const { return values.norm(); }
  auto block(LossBlock b) const { return values.segment(layout.offset(b), layout.rows(b)); }
  auto block(LossBlock b) { return values.segment(layout.offset(b), layout.rows(b)); }
};

class NonFiniteResidual : public std::runtime_error {
 public:
  NonFiniteResidual(LossBlock block, Eigen::Index point)
      : std::runtime_error("non-finite residual in block " + std::string(block_name(block)) + " at grid index " +
                           std::to_string(point)),
        block_(block),
        point_(point) {}
  LossBlock block() const { return block_; }
  Eigen::Index point() const { return point_; }

 private:
  LossBlock block_;
  Eigen::Index point_;
};

/// All solution fields at one instant.
struct FieldSample {
  double tau = 0.0;
  double time = 0.0;
  Vector state, state_dt;
  Vector costate, costate_dt;
  Vector control, aux, beta;
  double mu1_root = 0.0, mu2_root = 0.0;
  double mu1 = 0.0, mu2 = 0.0;

  double delta() const { return mu1 - mu2; }

  PmpPoint pmp_point() const { return {state, costate, control, aux, beta, delta()}; }
};

/// The discretised boundary-value problem for one ProblemSpec and SolverConfig.
class CollocationProblem {
 public:
  CollocationProblem(ProblemSpec spec, SolverConfig config)
      : spec_(std::move(spec)), config_(config), sat_(spec_.saturation()) {
    spec_.validate();
    gen_ = AffineLiouvillian(spec_.lindblad);
    basis_ = ElmBasis(config_.neurons, config_.seed, config_.weight_bound);
    grid_ = collocation_grid(config_.grid_points, config_.grid);
    features_.reserve(grid_.size());
    for (double tau : grid_) features_.push_back(tfc_features(basis_, tau));
    v0_ = embed(spec_.initial).values;
    vf_ = embed(spec_.target).values;
    p0_ = spec_.initial_purity();

    layout_.neurons = basis_.size();
    layout_.dim = gen_.embedded_dim();
    layout_.channels = gen_.num_controls();
    layout_.multipliers = spec_.purity_constraints;
    layout_.free_terminal_costate = config_.free_terminal_costate;

    loss_layout_.points = static_cast<Eigen::Index>(grid_.size());
    loss_layout_.dim = layout_.dim;
    loss_layout_.channels = layout_.channels;
    loss_layout_.constrained = spec_.purity_constraints;
  }

  const ProblemSpec& spec() const { return spec_; }
  const SolverConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  const LossLayout& loss_layout() const { return loss_layout_; }
  const ElmBasis& basis() const { return basis_; }
  const std::vector<double>& grid() const { return grid_; }
  const AffineLiouvillian& generator() const { return gen_; }
  const SaturationFunction& saturation() const { return sat_; }
  double initial_purity() const { return p0_; }

  /// Zero free functions (state = Hermite blend of the endpoints), t_f from the config.
  PinnParams initial_params() const {
    PinnParams p(layout_);
    p.set_rate(1.0 / config_.initial_final_time);
    if (layout_.multipliers) {
      // Constant roots spread over the features: h(tau)^T xi = root_init at tau = 1/2.
      const Vector mid = basis_.features(0.5);
      const Vector xi = mid * (config_.multiplier_root_init / mid.squaredNorm());
      p.values().segment(layout_.mu1_offset(), layout_.neurons) = xi;
      p.values().segment(layout_.mu2_offset(), layout_.neurons) = xi;
    }
    return p;
  }

  FieldSample sample(const PinnParams& p, const TfcFeatures& f, double tau) const {
    FieldSample s;
    const double c = p.rate();
    const Vector lf = p.terminal_costate();
    s.tau = tau;
    s.time = TimeMorph{c, 0.0}.unmorph(tau);
    s.state = p.state().transpose() * f.state + f.sw.omega1 * v0_ + f.sw.omega2 * vf_;
    s.state_dt = c * (p.state().transpose() * f.dstate + f.sw.d_omega1 * v0_ + f.sw.d_omega2 * vf_);
    s.costate = p.costate().transpose() * f.costate + f.sw.omega2 * lf;
    s.costate_dt = c * (p.costate().transpose() * f.dcostate + f.sw.d_omega2 * lf);
    s.control = p.control().transpose() * f.h;
    s.aux = p.aux().transpose() * f.h;
    s.beta = p.beta().transpose() * f.h;
    if (layout_.multipliers) {
      s.mu1_root = p.mu1_root().dot(f.h);
      s.mu2_root = p.mu2_root().dot(f.h);
      s.mu1 = s.mu1_root * s.mu1_root;
      s.mu2 = s.mu2_root * s.mu2_root;
    }
    return s;
  }

  FieldSample sample(const PinnParams& p, double tau) const { return sample(p, tfc_features(basis_, tau), tau); }

  std::vector<FieldSample> samples(const PinnParams& p) const {
    std::vector<FieldSample> out;
    out.reserve(grid_.size());
    for (std::size_t i = 0; i < grid_.size(); ++i) out.push_back(sample(p, features_[i], grid_[i]));
    return out;
  }

  LossVector residual(const PinnParams& p, double reg_weight) const {
    check_params(p);
    LossVector loss{loss_layout_, Vector::Zero(loss_layout_.size())};
    const Eigen::Index d = layout_.dim, m = layout_.channels;
    const PmpWeights w{spec_.energy_weight, reg_weight};
    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const auto pt = static_cast<Eigen::Index>(i);
      const FieldSample s = sample(p, features_[i], grid_[i]);
      const PmpPoint pmp = s.pmp_point();
      const Matrix a = gen_.real_at(s.control);
      loss.block(LossBlock::dynamics).segment(pt * d, d) = s.state_dt - a * s.state;
      loss.block(LossBlock::costate).segment(pt * d, d) = s.costate_dt - costate_rhs(pmp, gen_);
      loss.block(LossBlock::stationarity_u).segment(pt * m, m) = stationarity_control(pmp, gen_, w);
      loss.block(LossBlock::stationarity_nu).segment(pt * m, m) = stationarity_aux(pmp, w, sat_);
      for (Eigen::Index l = 0; l < m; ++l)
        loss.block(LossBlock::equality)(pt * m + l) = s.control(l) - sat_.value(s.aux(l));
      if (layout_.multipliers) {
        const Eigen::Vector2d h = state_constraint(s.state, p0_, spec_.purity_floor_fraction);
        loss.block(LossBlock::mu1_complementarity)(pt) = s.mu1 * h(0);
        loss.block(LossBlock::mu2_complementarity)(pt) = s.mu2 * h(1);
        loss.block(LossBlock::mu1_feasibility)(pt) = smooth_ramp(h(0), config_.ramp_sharpness);
        loss.block(LossBlock::mu2_feasibility)(pt) = smooth_ramp(h(1), config_.ramp_sharpness);
      }
      if (i + 1 == grid_.size())
        loss.block(LossBlock::transversality)(0) =
            config_.transversality_weight * transversality(pmp, gen_, w, sat_, spec_.time_weight);
    }
    check_finite(loss);
    return loss;
  }

  /// Exact Jacobian of `residual` with respect to the flat parameter vector.
  Matrix jacobian(const PinnParams& p, double reg_weight) const {
    check_params(p);
    const Eigen::Index d = layout_.dim, m = layout_.channels;
    Matrix jac = Matrix::Zero(loss_layout_.size(), layout_.size());
    const double c = p.rate();
    const double eta = spec_.energy_weight;
    const Matrix eye = Matrix::Identity(d, d);

    for (std::size_t i = 0; i < grid_.size(); ++i) {
      const auto pt = static_cast<Eigen::Index>(i);
      const TfcFeatures& f = features_[i];
      const FieldSample s = sample(p, f, grid_[i]);
      const double delta = s.delta();
      const Matrix a = gen_.real_at(s.control);
      const Matrix sym = a + a.transpose();
      const Vector q = s.costate - 2.0 * delta * s.state;
      const Vector sym_rho = sym * s.state;
      LocalMap map{*this, f, s, c};

      // dynamics: v' - A v
      {
        const Eigen::Index r0 = loss_layout_.offset(LossBlock::dynamics) + pt * d;
        map.state(jac, r0, -a);
        map.state_dt(jac, r0, eye);
        for (Eigen::Index l = 0; l < m; ++l) map.control(jac, r0, l, -(gen_.channel(l).real_matrix * s.state));
      }
      // costate: lambda' + A^T lambda - 2 delta (A + A^T) v
      {
        const Eigen::Index r0 = loss_layout_.offset(LossBlock::costate) + pt * d;
        map.costate(jac, r0, a.transpose());
        map.costate_dt(jac, r0, eye);
        map.state(jac, r0, -2.0 * delta * sym);
        for (Eigen::Index l = 0; l < m; ++l) {
          const Matrix& al = gen_.channel(l).real_matrix;
          map.control(jac, r0, l, al.transpose() * s.costate - 2.0 * delta * (al + al.transpose()) * s.state);
        }
        map.delta(jac, r0, -2.0 * sym_rho);
      }
      // stationarity in u, per channel
      for (Eigen::Index l = 0; l < m; ++l) {
        const Eigen::Index r = loss_layout_.offset(LossBlock::stationarity_u) + pt * m + l;
        const Matrix& al = gen_.channel(l).real_matrix;
        const Vector al_rho = al * s.state;
        map.state_row(jac, r, al.transpose() * q - 2.0 * delta * al_rho);
        map.costate_row(jac, r, al_rho);
        map.delta_row(jac, r, -2.0 * s.state.dot(al_rho));
        map.control_row(jac, r, l, 2.0 * eta);
        map.beta_row(jac, r, l, 1.0);
      }
      // stationarity in nu and the equality u = phi(nu)
      for (Eigen::Index l = 0; l < m; ++l) {
        const double nu = s.aux(l);
        const Eigen::Index rn = loss_layout_.offset(LossBlock::stationarity_nu) + pt * m + l;
        map.aux_row(jac, rn, l, 2.0 * reg_weight - s.beta(l) * sat_.d2(nu));
        map.beta_row(jac, rn, l, -sat_.d1(nu));
        const Eigen::Index re = loss_layout_.offset(LossBlock::equality) + pt * m + l;
        map.control_row(jac, re, l, 1.0);
        map.aux_row(jac, re, l, -sat_.d1(nu));
      }
      if (layout_.multipliers) {
        const Eigen::Vector2d h = state_constraint(s.state, p0_, spec_.purity_floor_fraction);
        const Vector grad_p = purity_gradient(s.state);
        const double k = config_.ramp_sharpness;
        const Eigen::Index rc1 = loss_layout_.offset(LossBlock::mu1_complementarity) + pt;
        map.state_row(jac, rc1, s.mu1 * grad_p);
        map.mu_row(jac, rc1, 1, h(0));
        const Eigen::Index rc2 = loss_layout_.offset(LossBlock::mu2_complementarity) + pt;
        map.state_row(jac, rc2, -s.mu2 * grad_p);
        map.mu_row(jac, rc2, 2, h(1));
        map.state_row(jac, loss_layout_.offset(LossBlock::mu1_feasibility) + pt, smooth_ramp_d1(h(0), k) * grad_p);
        map.state_row(jac, loss_layout_.offset(LossBlock::mu2_feasibility) + pt, -smooth_ramp_d1(h(1), k) * grad_p);
      }
      if (i + 1 == grid_.size()) {
        const Eigen::Index r = loss_layout_.offset(LossBlock::transversality);
        const double wt = config_.transversality_weight;
        const Vector a_rho = a * s.state;
        map.state_row(jac, r, wt * (a.transpose() * q - 2.0 * delta * a_rho));
        map.costate_row(jac, r, wt * a_rho);
        map.delta_row(jac, r, -2.0 * wt * s.state.dot(a_rho));
        for (Eigen::Index l = 0; l < m; ++l) {
          const double nu = s.aux(l);
          const double du = q.dot(gen_.channel(l).real_matrix * s.state) + 2.0 * eta * s.control(l) + s.beta(l);
          map.control_row(jac, r, l, wt * du);
          map.aux_row(jac, r, l, wt * (2.0 * reg_weight * nu - s.beta(l) * sat_.d1(nu)));
          map.beta_row(jac, r, l, wt * (s.control(l) - sat_.value(nu)));
        }
      }
    }
    return jac;
  }

  /// Forward differences, column by column.
  Matrix jacobian_fd(const PinnParams& p, double reg_weight, double step) const {
    const Vector r0 = residual(p, reg_weight).values;
    Matrix jac(r0.size(), layout_.size());
    PinnParams q = p;
    for (Eigen::Index j = 0; j < layout_.size(); ++j) {
      const double keep = q.values()(j);
      q.values()(j) = keep + step;
      jac.col(j) = (residual(q, reg_weight).values - r0) / step;
      q.values()(j) = keep;
    }
    return jac;
  }

  Matrix jacobian(const PinnParams& p, double reg_weight, JacobianMode mode) const {
    return mode == JacobianMode::analytic ? jacobian(p, reg_weight) : jacobian_fd(p, reg_weight, config_.fd_step);
  }

  /// Gamma t_f + eta int |u|^2 + w int |nu|^2 with the trapezoidal rule on the collocation grid.
  double regularized_cost(const PinnParams& p, double reg_weight) const {
    const auto ss = samples(p);
    std::vector<double> t(ss.size()), u2(ss.size()), nu2(ss.size());
    for (std::size_t i = 0; i < ss.size(); ++i) {
      t[i] = ss[i].time;
      u2[i] = ss[i].control.squaredNorm();
      nu2[i] = ss[i].aux.squaredNorm();
    }
    return spec_.time_weight * (t.back() - t.front()) + spec_.energy_weight * trapezoid(t, u2) +
           reg_weight * trapezoid(t, nu2);
  }

 private:
  // Scatters derivatives with respect to local fields at one grid point into the
  // global Jacobian, following the linear maps from parameters to fields.
  struct LocalMap {
    const CollocationProblem& prob;
    const TfcFeatures& f;
    const FieldSample& s;
    double c;

    const ParamLayout& lay() const { return prob.layout_; }

    // g: rows x d block of d(residual)/d(state)
    void state(Matrix& jac, Eigen::Index r0, const Matrix& g) const {
      const Eigen::Index L = lay().neurons;
      for (Eigen::Index k = 0; k < lay().dim; ++k)
        jac.block(r0, lay().state_offset() + k * L, g.rows(), L).noalias() += g.col(k) * f.state.transpose();
    }
    void state_dt(Matrix& jac, Eigen::Index r0, const Matrix& g) const {
      const Eigen::Index L = lay().neurons;
      for (Eigen::Index k = 0; k < lay().dim; ++k)
        jac.block(r0, lay().state_offset() + k * L, g.rows(), L).noalias() += c * g.col(k) * f.dstate.transpose();
      jac.block(r0, lay().rate_offset(), g.rows(), 1).noalias() += g * s.state_dt;
    }
    void costate(Matrix& jac, Eigen::Index r0, const Matrix& g) const {
      const Eigen::Index L = lay().neurons;
      for (Eigen::Index k = 0; k < lay().dim; ++k)
        jac.block(r0, lay().costate_offset() + k * L, g.rows(), L).noalias() += g.col(k) * f.costate.transpose();
      if (lay().free_terminal_costate)
        jac.block(r0, lay().terminal_offset(), g.rows(), lay().dim).noalias() += f.sw.omega2 * g;
    }
    void costate_dt(Matrix& jac, Eigen::Index r0, const Matrix& g) const {
      const Eigen::Index L = lay().neurons;
      for (Eigen::Index k = 0; k < lay().dim; ++k)
        jac.block(r0, lay().costate_offset() + k * L, g.rows(), L).noalias() += c * g.col(k) * f.dcostate.transpose();
      if (lay().free_terminal_costate)
        jac.block(r0, lay().terminal_offset(), g.rows(), lay().dim).noalias() += (c * f.sw.d_omega2) * g;
      jac.block(r0, lay().rate_offset(), g.rows(), 1).noalias() += g * s.costate_dt;
    }
    // g: column of d(residual rows)/d(u_l)
    void control(Matrix& jac, Eigen::Index r0, Eigen::Index l, const Vector& g) const {
      jac.block(r0, lay().control_offset() + l * lay().neurons, g.size(), lay().neurons).noalias() +=
          g * f.h.transpose();
    }
    void delta(Matrix& jac, Eigen::Index r0, const Vector& g) const {
      if (!lay().multipliers) return;
      const Eigen::Index L = lay().neurons;
      jac.block(r0, lay().mu1_offset(), g.size(), L).noalias() += (2.0 * s.mu1_root) * g * f.h.transpose();
      jac.block(r0, lay().mu2_offset(), g.size(), L).noalias() -= (2.0 * s.mu2_root) * g * f.h.transpose();
    }

    void state_row(Matrix& jac, Eigen::Index r, const Vector& g) const { state(jac, r, g.transpose()); }
    void costate_row(Matrix& jac, Eigen::Index r, const Vector& g) const { costate(jac, r, g.transpose()); }
    void delta_row(Matrix& jac, Eigen::Index r, double g) const { delta(jac, r, Vector::Constant(1, g)); }
    void scalar_row(Matrix& jac, Eigen::Index r, Eigen::Index off, double g) const {
      jac.row(r).segment(off, lay().neurons) += g * f.h.transpose();
    }
    void control_row(Matrix& jac, Eigen::Index r, Eigen::Index l, double g) const {
      scalar_row(jac, r, lay().control_offset() + l * lay().neurons, g);
    }
    void aux_row(Matrix& jac, Eigen::Index r, Eigen::Index l, double g) const {
      scalar_row(jac, r, lay().aux_offset() + l * lay().neurons, g);
    }
    void beta_row(Matrix& jac, Eigen::Index r, Eigen::Index l, double g) const {
      scalar_row(jac, r, lay().beta_offset() + l * lay().neurons, g);
    }
    // d(residual)/d(mu_which) = g, chained through mu = root^2.
    void mu_row(Matrix& jac, Eigen::Index r, int which, double g) const {
      const double root = which == 1 ? s.mu1_root : s.mu2_root;
      scalar_row(jac, r, which == 1 ? lay().mu1_offset() : lay().mu2_offset(), 2.0 * root * g);
    }
  };

  void check_params(const PinnParams& p) const {
    require_dims(p.values().size() == layout_.size(), "parameter vector does not match the collocation layout");
  }

  void check_finite(const LossVector& loss) const {
    if (loss.values.allFinite()) return;
    for (LossBlock b : kLossBlocks) {
      const auto blk = loss.block(b);
      for (Eigen::Index k = 0; k < blk.size(); ++k) {
        if (std::isfinite(blk(k))) continue;
        Eigen::Index per_point = 1;
        if (b == LossBlock::dynamics || b == LossBlock::costate) per_point = layout_.dim;
        if (b == LossBlock::stationarity_u || b == LossBlock::stationarity_nu || b == LossBlock::equality)
          per_point = layout_.channels;
        throw NonFiniteResidual(b, b == LossBlock::transversality ? loss_layout_.points - 1 : k / per_point);
      }
    }
  }

  ProblemSpec spec_;
  SolverConfig config_;
  SaturationFunction sat_;
  AffineLiouvillian gen_;
  ElmBasis basis_;
  std::vector<double> grid_;
  std::vector<TfcFeatures> features_;
  Vector v0_, vf_;
  double p0_ = 1.0;
  ParamLayout layout_;
  LossLayout loss_layout_;
};

/// Damped least-squares solves that share one SVD of the Jacobian:
/// (J^T J + mu I) dx = -J^T r, i.e. dx = -V diag(s / (s^2 + mu)) U^T r.
class LeastSquaresStep {
 public:
  LeastSquaresStep(const Matrix& jac, const Vector& residual) {
    require_dims(jac.rows() == residual.size(), "Jacobian and residual differ in row count");
    if (!jac.allFinite()) throw std::runtime_error("Jacobian has non-finite entries");
    svd_.compute(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd_.info() != Eigen::Success) throw std::runtime_error("SVD of the Jacobian failed");
    projected_ = svd_.matrixU().transpose() * residual;
    rows_ = jac.rows();
  }

  /// With damping 0, singular values below the numerical rank cutoff are dropped and the
  /// result is the minimum-norm pseudo-inverse step. Any positive damping keeps them all.
  Vector solve(double damping) const {
    const Vector& s = svd_.singularValues();
    const double cutoff =
        damping > 0.0 || !s.size() ? 0.0 : s(0) * std::numeric_limits<double>::epsilon() * std::max(rows_, s.size());
    Vector scaled(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      const double den = s(k) * s(k) + damping;
      scaled(k) = s(k) > cutoff && den > 0.0 ? s(k) * projected_(k) / den : 0.0;
    }
    return -(svd_.matrixV() * scaled);
  }

  double largest_singular_value() const {
    return svd_.singularValues().size() ? svd_.singularValues()(0) : 0.0;
  }

 private:
  Eigen::BDCSVD<Matrix> svd_;
  Vector projected_;
  Eigen::Index rows_ = 0;
};

inline Vector ls_step(const Matrix& jac, const Vector& residual, double damping) {
  return LeastSquaresStep(jac, residual).solve(damping);
}

struct StageReport {
  double reg_weight = 0.0;
  int iterations = 0;
  double loss = 0.0;
  bool converged = false;
  double final_time = 0.0;
  double cost = 0.0;  // regularised cost at this stage's weight
  bool timed_out = false;
};

struct SolveReport {
  PinnParams params;
  int iterations = 0;
  std::vector<double> loss_history;
  std::vector<StageReport> stages;
  double final_loss = 0.0;
  double final_time = 0.0;
  double reg_weight = 0.0;  // weight of the last stage

  double max_constraint_violation = 0.0;   // max over grid of max(h1, h2, 0)
  double complementarity_residual = 0.0;   // max over grid of |mu_i h_i|
  double lc_margin_min = 0.0;              // min over grid of 2w - |beta| max|phi''|
  double lc_pointwise_margin_min = 0.0;    // min over grid of 2w - beta phi''(nu)
  double transversality_residual = 0.0;    // |H(t_f) + Gamma|, unweighted
  bool cost_nonincreasing = true;
  bool converged = false;
  bool timed_out = false;
};

struct TrainObserver {
  virtual ~TrainObserver() = default;
  virtual void on_iteration(std::size_t /*stage*/, int /*iteration*/, double /*loss*/, double /*damping*/) {}
};

/// Post-solve audit quantities evaluated on the collocation grid.
inline void audit_solution(const CollocationProblem& prob, SolveReport& report) {
  const auto ss = prob.samples(report.params);
  const auto& sat = prob.saturation();
  const double w = report.reg_weight;
  report.max_constraint_violation = 0.0;
  report.complementarity_residual = 0.0;
  report.lc_margin_min = std::numeric_limits<double>::infinity();
  report.lc_pointwise_margin_min = std::numeric_limits<double>::infinity();
  for (const auto& s : ss) {
    const Eigen::Vector2d h =
        state_constraint(s.state, prob.initial_purity(), prob.spec().purity_floor_fraction);
    if (prob.spec().purity_constraints) {
      report.max_constraint_violation = std::max({report.max_constraint_violation, h(0), h(1)});
      report.complementarity_residual =
          std::max({report.complementarity_residual, std::abs(s.mu1 * h(0)), std::abs(s.mu2 * h(1))});
    }
    for (Eigen::Index l = 0; l < s.beta.size(); ++l) {
      const auto lc = legendre_clebsch(prob.spec().energy_weight, w, s.beta(l), sat);
      report.lc_margin_min = std::min(report.lc_margin_min, lc.margin);
      report.lc_pointwise_margin_min =
          std::min(report.lc_pointwise_margin_min, hessian_aux_entry(w, s.beta(l), s.aux(l), sat));
    }
  }
  const PmpWeights pw{prob.spec().energy_weight, w};
  report.transversality_residual =
      std::abs(transversality(ss.back().pmp_point(), prob.generator(), pw, sat, prob.spec().time_weight));
  report.final_time = report.params.rate() > 0.0 ? 1.0 / report.params.rate() : 0.0;
}

/// One continuation stage: iterate damped steps until the loss norm drops below the
/// tolerance or no descent step can be found. `damping` is carried between stages.
inline StageReport train_stage(const CollocationProblem& prob, PinnParams& params, double reg_weight, double& damping,
                               std::vector<double>& history, std::size_t stage_index = 0,
                               TrainObserver* observer = nullptr,
                               std::optional<std::chrono::steady_clock::time_point> deadline = std::nullopt) {
  const SolverConfig& cfg = prob.config();
  StageReport st;
  st.reg_weight = reg_weight;
  LossVector loss = prob.residual(params, reg_weight);
  double norm = loss.norm();
  history.push_back(norm);

  for (int it = 0; it < cfg.max_iterations && norm >= cfg.tolerance; ++it) {
    if (deadline && std::chrono::steady_clock::now() >= *deadline) {
      st.timed_out = true;
      break;
    }
    const Matrix jac = prob.jacobian(params, reg_weight, cfg.jacobian);
    std::optional<LeastSquaresStep> step;
    try {
      step.emplace(jac, loss.values);
    } catch (const std::runtime_error&) {
      break;
    }
    bool accepted = false;
    while (!accepted && damping <= cfg.damping_ceiling) {
      const Vector dx = step->solve(damping);
      double alpha = 1.0;
      for (int h = 0; h <= cfg.max_line_search_halvings; ++h, alpha *= 0.5) {
        PinnParams trial = params;
        trial.values() += alpha * dx;
        try {
          LossVector trial_loss = prob.residual(trial, reg_weight);
          const double trial_norm = trial_loss.norm();
          if (trial_norm < norm) {
            params = std::move(trial);
            loss = std::move(trial_loss);
            norm = trial_norm;
            accepted = true;
            break;
          }
        } catch (const NonFiniteResidual&) {
        }
      }
      if (accepted) {
        if (alpha == 1.0) damping = std::max(damping / 10.0, cfg.damping_floor);
      } else {
        damping = std::max(damping * 10.0, cfg.damping_floor);
      }
    }
    if (!accepted) {
      damping = cfg.damping_ceiling;
      break;
    }
    ++st.iterations;
    history.push_back(norm);
    if (observer) observer->on_iteration(stage_index, it + 1, norm, damping);
  }
  st.loss = norm;
  st.converged = norm < cfg.tolerance;
  st.final_time = 1.0 / params.rate();
  st.cost = prob.regularized_cost(params, reg_weight);
  return st;
}

/// Continuation over the regularisation schedule, warm-starting each stage.
inline SolveReport train(const CollocationProblem& prob, TrainObserver* observer = nullptr) {
  SolveReport report;
  report.params = prob.initial_params();
  double damping = prob.config().initial_damping;
  const auto& schedule = prob.spec().reg_schedule;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  if (prob.config().time_limit_seconds > 0.0)
    deadline = std::chrono::steady_clock::now() + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                      std::chrono::duration<double>(prob.config().time_limit_seconds));
  report.converged = true;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    StageReport st =
        train_stage(prob, report.params, schedule[k], damping, report.loss_history, k, observer, deadline);
    report.iterations += st.iterations;
    report.timed_out = report.timed_out || st.timed_out;
    report.converged = report.converged && st.converged;
    if (!report.stages.empty() && st.cost > report.stages.back().cost + 1e-6) report.cost_nonincreasing = false;
    report.stages.push_back(st);
    // A stalled stage leaves the damping at its ceiling; restart the next one fresh.
    if (damping >= prob.config().damping_ceiling) damping = prob.config().initial_damping;
  }
  report.final_loss = report.stages.back().loss;
  report.reg_weight = schedule.back();
  audit_solution(prob, report);
  return report;
}

inline SolveReport train(const ProblemSpec& spec, const SolverConfig& config, TrainObserver* observer = nullptr) {
  return train(CollocationProblem(spec, config), observer);
}

/// The trained control u(t) as a propagator input on [0, t_f].
inline ControlSignal learned_control(const CollocationProblem& prob, const PinnParams& params) {
  const double c = params.rate();
  const Matrix xi = params.control();
  const ElmBasis basis = prob.basis();
  return ControlSignal::function(
      [xi, basis, c](double t) -> Vector {
        const double tau = std::clamp(TimeMorph{c, 0.0}.morph(t), kTau0, kTauF);
        return xi.transpose() * basis.features(tau);
      },
      xi.cols());
}

struct PropagationAudit {
  Trajectory trajectory;
  double terminal_fidelity = 0.0;
  double max_band_violation = 0.0;  // max over samples of max(P - P0, f P0 - P, 0)
  double max_trace_drift = 0.0;
};

/// Re-propagate the learned control from the initial state with the reference integrator.
inline PropagationAudit audit_by_propagation(const CollocationProblem& prob, const PinnParams& params,
                                             double steps_per_unit_time = 2000.0) {
  PropagationAudit out;
  const double tf = 1.0 / params.rate();
  const int steps = std::max(200, static_cast<int>(std::ceil(steps_per_unit_time * tf)));
  const ProblemSpec& spec = prob.spec();
  out.trajectory =
      propagate(prob.generator(), embed(spec.initial).values, learned_control(prob, params), 0.0, tf, steps);
  const double p0 = prob.initial_purity();
  const Vector tr = trace_functional(spec.lindblad.dim());
  for (const auto& v : out.trajectory.states) {
    const Eigen::Vector2d h = state_constraint(v.values, p0, spec.purity_floor_fraction);
    out.max_band_violation = std::max({out.max_band_violation, h(0), h(1)});
    out.max_trace_drift = std::max(out.max_trace_drift, std::abs(tr.dot(v.values) - 1.0));
  }
  const CMatrix final_rho = embedded_to_matrix(out.trajectory.states.back().values);
  out.terminal_fidelity = purity_normalized_fidelity(final_rho, spec.target.matrix());
  return out;
}

}  // namespace ponn
