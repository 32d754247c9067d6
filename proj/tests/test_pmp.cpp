#include <gtest/gtest.h>

#include <random>

#include "ponn/pmp.hpp"

using namespace ponn;

namespace {

struct Fixture {
  AffineLiouvillian gen{two_level_spec(1.0, 0.1)};
  SaturationFunction sat{-3.0, 3.0, 10.0};
  PmpWeights w{0.1, 0.05};
  std::mt19937_64 rng{42};

  PmpPoint random_point() {
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    PmpPoint p;
    p.state = Vector::NullaryExpr(8, [&] { return ud(rng); });
    p.costate = Vector::NullaryExpr(8, [&] { return ud(rng); });
    p.control = Vector::Constant(1, 2.0 * ud(rng));
    p.aux = Vector::Constant(1, 2.0 * ud(rng));
    p.beta = Vector::Constant(1, ud(rng));
    p.delta = ud(rng);
    return p;
  }

  static PmpPoint zero_point() {
    return {Vector::Zero(8), Vector::Zero(8), Vector::Zero(1), Vector::Zero(1), Vector::Zero(1), 0.0};
  }
};

}  // namespace

TEST(Hamiltonian, VanishesAtZero) {
  Fixture f;
  EXPECT_EQ(hamiltonian(Fixture::zero_point(), f.gen, f.w, f.sat), 0.0);
}

TEST(Hamiltonian, ReducesWithoutMultipliers) {
  Fixture f;
  PmpPoint p = f.random_point();
  p.delta = 0.0;
  p.beta.setZero();
  const Matrix a = f.gen.real_at(p.control);
  const double expect = p.costate.dot(a * p.state) + f.w.energy * p.control.squaredNorm() + f.w.reg * p.aux.squaredNorm();
  EXPECT_NEAR(hamiltonian(p, f.gen, f.w, f.sat), expect, 1e-14);
}

TEST(CostateRhs, SpecialCases) {
  Fixture f;
  PmpPoint p = f.random_point();
  const Matrix a = f.gen.real_at(p.control);
  p.delta = 0.0;
  EXPECT_LE((costate_rhs(p, f.gen) + a.transpose() * p.costate).cwiseAbs().maxCoeff(), 1e-15);
  p.costate.setZero();
  p.delta = 1.0;
  EXPECT_LE((costate_rhs(p, f.gen) - 2.0 * (a + a.transpose()) * p.state).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(CostateRhs, MatchesHamiltonianGradient) {
  Fixture f;
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const PmpPoint p = f.random_point();
    const Vector rhs = costate_rhs(p, f.gen);
    for (int i = 0; i < 8; ++i) {
      PmpPoint a = p, b = p;
      a.state(i) += h;
      b.state(i) -= h;
      const double fd = (hamiltonian(a, f.gen, f.w, f.sat) - hamiltonian(b, f.gen, f.w, f.sat)) / (2 * h);
      ASSERT_NEAR(rhs(i), -fd, 1e-6);
    }
  }
}

TEST(StationarityU, Examples) {
  Fixture f;
  PmpPoint p = Fixture::zero_point();
  p.control(0) = 0.7;
  EXPECT_DOUBLE_EQ(stationarity_control(p, f.gen, f.w)(0), 2.0 * f.w.energy * 0.7);

  PmpPoint q = f.random_point();
  q.beta.setZero();
  const double r0 = stationarity_control(q, f.gen, f.w)(0);
  q.beta(0) = -r0;
  EXPECT_NEAR(stationarity_control(q, f.gen, f.w)(0), 0.0, 1e-15);
}

TEST(StationarityU, MatchesHamiltonianDerivative) {
  Fixture f;
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const PmpPoint p = f.random_point();
    PmpPoint a = p, b = p;
    a.control(0) += h;
    b.control(0) -= h;
    const double fd = (hamiltonian(a, f.gen, f.w, f.sat) - hamiltonian(b, f.gen, f.w, f.sat)) / (2 * h);
    ASSERT_NEAR(stationarity_control(p, f.gen, f.w)(0), fd, 1e-7);
  }
}

TEST(StationarityU, UnconstrainedOptimum) {
  Fixture f;
  PmpPoint p = f.random_point();
  p.delta = 0.0;
  p.beta.setZero();
  p.control(0) = 0.0;
  // H is quadratic in u with L~ affine, so the classical formula uses the channel only.
  const double lin = p.costate.dot(f.gen.channel(0).real_matrix * p.state);
  p.control(0) = -lin / (2.0 * f.w.energy);
  EXPECT_NEAR(stationarity_control(p, f.gen, f.w)(0), 0.0, 1e-14);
}

TEST(StationarityNu, Examples) {
  Fixture f;
  EXPECT_EQ(stationarity_aux(0.0, 0.0, 0.3, f.sat), 0.0);
  EXPECT_DOUBLE_EQ(stationarity_aux(1.5, 0.0, 0.3, f.sat), 0.9);
}

TEST(StationarityNu, MatchesHamiltonianDerivative) {
  Fixture f;
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const PmpPoint p = f.random_point();
    PmpPoint a = p, b = p;
    a.aux(0) += h;
    b.aux(0) -= h;
    const double fd = (hamiltonian(a, f.gen, f.w, f.sat) - hamiltonian(b, f.gen, f.w, f.sat)) / (2 * h);
    ASSERT_NEAR(stationarity_aux(p, f.w, f.sat)(0), fd, 1e-7);
  }
}

TEST(Transversality, Arithmetic) {
  Fixture f;
  EXPECT_EQ(transversality(Fixture::zero_point(), f.gen, f.w, f.sat, 0.0), 0.0);
  PmpPoint p = Fixture::zero_point();
  p.state = Vector::Random(8);
  p.control(0) = 0.4;
  p.aux(0) = -1.2;
  EXPECT_NEAR(transversality(p, f.gen, f.w, f.sat, 1.0), f.w.energy * 0.16 + f.w.reg * 1.44 + 1.0, 1e-15);
}

TEST(LegendreClebsch, BoundaryAndMargin) {
  const SaturationFunction sat(-3.0, 3.0, 10.0);
  const double eps = sat.max_abs_d2();
  const auto zero_beta = legendre_clebsch(0.1, 1e-4, 0.0, sat);
  EXPECT_TRUE(zero_beta.satisfied);
  EXPECT_DOUBLE_EQ(zero_beta.margin, 2e-4);

  const double beta = 0.3;
  const auto edge = legendre_clebsch(0.1, 0.5 * beta * eps, beta, sat);
  EXPECT_FALSE(edge.satisfied);
  EXPECT_NEAR(edge.margin, 0.0, 1e-15);
  EXPECT_TRUE(legendre_clebsch(0.1, 0.51 * beta * eps, -beta, sat).satisfied);
  EXPECT_FALSE(legendre_clebsch(0.0, 1.0, 0.0, sat).satisfied);
}

TEST(LegendreClebsch, SufficientConditionBoundsEveryNu) {
  const SaturationFunction sat(-3.0, 3.0, 10.0);
  const double beta = -0.8;
  const double w = 0.5 * std::abs(beta) * sat.max_abs_d2() * 1.001;
  for (double nu = -5.0; nu <= 5.0; nu += 1e-3) EXPECT_GT(hessian_aux_entry(w, beta, nu, sat), 0.0);
}

TEST(LegendreClebsch, HessianEntryMatchesSecondDifference) {
  Fixture f;
  const double h = 1e-4;
  for (int k = 0; k < 20; ++k) {
    const PmpPoint p = f.random_point();
    PmpPoint a = p, b = p;
    a.aux(0) += h;
    b.aux(0) -= h;
    const double fd = (hamiltonian(a, f.gen, f.w, f.sat) - 2 * hamiltonian(p, f.gen, f.w, f.sat) +
                       hamiltonian(b, f.gen, f.w, f.sat)) /
                      (h * h);
    EXPECT_NEAR(hessian_aux_entry(f.w.reg, p.beta(0), p.aux(0), f.sat), fd, 1e-5);
  }
}

TEST(PmpPoint, DimensionChecks) {
  Fixture f;
  PmpPoint p = Fixture::zero_point();
  p.costate = Vector::Zero(4);
  EXPECT_THROW(hamiltonian(p, f.gen, f.w, f.sat), DimensionError);
  PmpPoint q = Fixture::zero_point();
  q.beta = Vector::Zero(2);
  EXPECT_THROW(stationarity_control(q, f.gen, f.w), DimensionError);
}
