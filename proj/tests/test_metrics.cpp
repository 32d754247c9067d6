#include <gtest/gtest.h>

#include <random>

#include "ponn/metrics.hpp"
#include "ponn/selftest.hpp"

using namespace ponn;

TEST(Fidelity, SelfAndOrthogonal) {
  EXPECT_DOUBLE_EQ(fidelity(DensityState::basis(2, 0), DensityState::basis(2, 0)), 1.0);
  EXPECT_EQ(fidelity(DensityState::basis(2, 0), DensityState::basis(2, 1)), 0.0);
  std::mt19937_64 gen(1);
  for (int k = 0; k < 20; ++k) {
    const DensityState rho = selftest::random_density(gen, 3);
    EXPECT_NEAR(fidelity(rho, rho), 1.0, 1e-12);
  }
}

TEST(Fidelity, Symmetric) {
  std::mt19937_64 gen(2);
  for (int k = 0; k < 50; ++k) {
    const DensityState a = selftest::random_density(gen, 3), b = selftest::random_density(gen, 3);
    EXPECT_NEAR(fidelity(a, b), fidelity(b, a), 1e-14);
    EXPECT_GE(fidelity(a, b), 0.0);
  }
}

TEST(Fidelity, PureTargetAgainstOverlapShortcut) {
  std::mt19937_64 gen(3);
  for (int k = 0; k < 50; ++k) {
    const CVector psi = selftest::random_complex(gen, 3, 1).normalized();
    const DensityState rho = selftest::random_density(gen, 3);
    const CMatrix r = rho.matrix();
    const double q = (psi.adjoint() * r * psi)(0, 0).real();
    const double p = (r * r).trace().real();
    const PureFidelity f = fidelity_to_pure(rho, psi);
    EXPECT_NEAR(f.value, q / p, 1e-12);
    EXPECT_FALSE(f.renormalized);
    // The general ratio carries one more factor of the overlap.
    EXPECT_NEAR(fidelity(rho, DensityState::pure(psi)), q * q / p, 1e-12);
    EXPECT_NEAR(fidelity(rho, DensityState::pure(psi)), q * f.value, 1e-12);
  }
}

TEST(Fidelity, FormulasAgreeAtUnitAndZeroOverlap) {
  std::mt19937_64 gen(5);
  for (int k = 0; k < 50; ++k) {
    const CVector psi = selftest::random_complex(gen, 3, 1).normalized();
    const DensityState rho = DensityState::pure(psi);
    EXPECT_NEAR(fidelity(rho, DensityState::pure(psi)), fidelity_to_pure(rho, psi).value, 1e-12);
    CVector perp = selftest::random_complex(gen, 3, 1);
    perp -= psi * psi.dot(perp);
    EXPECT_NEAR(fidelity(rho, DensityState::pure(perp)), fidelity_to_pure(rho, perp).value, 1e-12);
  }
}

TEST(Fidelity, MaximallyMixedIsDegenerate) {
  // The shortcut scores every pure target 1 against the maximally mixed state; the general ratio gives 1/2.
  std::mt19937_64 gen(4);
  const DensityState mixed = DensityState::maximally_mixed(2);
  for (int k = 0; k < 10; ++k) {
    const CVector psi = selftest::random_complex(gen, 2, 1);
    EXPECT_NEAR(fidelity_to_pure(mixed, psi).value, 1.0, 1e-12);
    EXPECT_NEAR(fidelity(mixed, DensityState::pure(psi)), 0.5 * 0.5 / 0.5, 1e-12);
  }
}

TEST(Fidelity, RenormalizesTargetVector) {
  CVector psi(2);
  psi << 2.0, 0.0;
  const PureFidelity f = fidelity_to_pure(DensityState::basis(2, 0), psi);
  EXPECT_TRUE(f.renormalized);
  EXPECT_DOUBLE_EQ(f.value, 1.0);
  EXPECT_THROW(fidelity_to_pure(DensityState::basis(2, 0), CVector::Zero(2)), DomainError);
  EXPECT_THROW(fidelity_to_pure(DensityState::basis(2, 0), CVector::Zero(3)), DimensionError);
  EXPECT_THROW(purity_normalized_fidelity(CMatrix::Zero(2, 2), CMatrix::Identity(2, 2)), DomainError);
}
