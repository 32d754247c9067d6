#include <gtest/gtest.h>

#include <random>

#include "ponn/selftest.hpp"
#include "ponn/superop.hpp"

using namespace ponn;

namespace {

const cplx I1(0.0, 1.0);

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(DensityState, RejectsInvalidMatrices) {
  CMatrix non_hermitian(2, 2);
  non_hermitian << 0.5, 0.1, 0.2, 0.5;
  EXPECT_THROW(DensityState{non_hermitian}, DomainError);

  CMatrix bad_trace = CMatrix::Identity(2, 2);
  EXPECT_THROW(DensityState{bad_trace}, DomainError);

  CMatrix negative(2, 2);
  negative << 1.5, 0.0, 0.0, -0.5;
  EXPECT_THROW(DensityState{negative}, DomainError);

  EXPECT_THROW(DensityState{CMatrix(2, 3)}, DimensionError);
}

TEST(DensityState, ToleratesNumericalSlack) {
  CMatrix m(2, 2);
  m << 1.0 + 4.5e-10, 0.0, 0.0, -5e-10;  // trace off by 5e-11, one slightly negative eigenvalue
  EXPECT_NO_THROW(DensityState{m});
}

TEST(DensityState, Factories) {
  const auto b = DensityState::basis(3, 2);
  EXPECT_EQ(b.matrix()(2, 2), cplx(1.0));
  EXPECT_EQ(b.matrix().cwiseAbs().sum(), 1.0);

  const auto mixed = DensityState::maximally_mixed(2);
  EXPECT_DOUBLE_EQ(mixed.matrix()(0, 0).real(), 0.5);

  CVector psi(2);
  psi << cplx(3.0, 0.0), cplx(0.0, 4.0);  // normalised internally
  const auto p = DensityState::pure(psi);
  EXPECT_NEAR(p.matrix()(0, 0).real(), 9.0 / 25.0, 1e-15);
  EXPECT_NEAR(std::abs(p.matrix()(0, 1) - cplx(0.0, -12.0 / 25.0)), 0.0, 1e-15);
  EXPECT_THROW(DensityState::pure(CVector::Zero(2)), DomainError);
}

TEST(LindbladSpec, Validation) {
  LindbladSpec s = two_level_spec(1.0, 0.1);
  EXPECT_NO_THROW(s.validate());

  LindbladSpec neg = s;
  neg.dissipators[0].rate = -0.1;
  EXPECT_THROW(neg.validate(), DomainError);

  LindbladSpec nh = s;
  nh.controls[0](0, 1) = I1;
  EXPECT_THROW(nh.validate(), DomainError);

  LindbladSpec nd = s;
  nd.drift(0, 1) = nd.drift(1, 0) = 0.3;
  EXPECT_THROW(nd.validate(), DomainError);

  LindbladSpec shape = s;
  shape.controls[0] = CMatrix::Zero(3, 3);
  EXPECT_THROW(shape.validate(), DimensionError);
}

TEST(LindbladRhs, DiagonalStateIsFixedUnderDiagonalHamiltonian) {
  const auto spec = two_level_spec(1.0, 0.0);
  CMatrix rho = CMatrix::Zero(2, 2);
  rho(0, 0) = 0.3;
  rho(1, 1) = 0.7;
  EXPECT_EQ(max_abs(lindblad_rhs(DensityState(rho), spec, Vector::Zero(1))), 0.0);
}

TEST(LindbladRhs, ExcitedStateDecay) {
  const double gamma = 0.1;
  const auto spec = two_level_spec(1.0, gamma);
  const CMatrix d = lindblad_rhs(DensityState::basis(2, 1), spec, Vector::Zero(1));
  EXPECT_NEAR(d(1, 1).real(), -gamma, 1e-15);
  EXPECT_NEAR(d(0, 0).real(), gamma, 1e-15);
  EXPECT_NEAR(max_abs(d - d.adjoint()), 0.0, 1e-15);
}

TEST(LindbladRhs, TracelessAndHermitian) {
  std::mt19937_64 gen(3);
  const auto spec = selftest::random_model(gen);
  for (int k = 0; k < 20; ++k) {
    const auto rho = selftest::random_density(gen, 3);
    const CMatrix d = lindblad_rhs(rho, spec, Vector::Random(2));
    EXPECT_LE(std::abs(d.trace()), 1e-12);
    EXPECT_LE(max_abs(d - d.adjoint()), 1e-12);
  }
}

TEST(LindbladRhs, DimensionMismatch) {
  EXPECT_THROW(lindblad_rhs(DensityState::basis(3, 0), two_level_spec(1.0, 0.1), Vector::Zero(1)), DimensionError);
  EXPECT_THROW(lindblad_rhs(DensityState::basis(2, 0), two_level_spec(1.0, 0.1), Vector::Zero(2)), DimensionError);
}

TEST(Vectorize, MappingRule) {
  CMatrix e01 = CMatrix::Zero(2, 2);
  e01(0, 1) = 1.0;
  CVector expect = CVector::Zero(4);
  expect(2) = 1.0;  // |1> (x) |0>
  EXPECT_EQ(vectorize(e01), expect);

  CVector id(4);
  id << 1.0, 0.0, 0.0, 1.0;
  EXPECT_EQ(vectorize(CMatrix(CMatrix::Identity(2, 2))), id);
}

TEST(Vectorize, RoundTrip) {
  std::mt19937_64 gen(7);
  const CMatrix m = selftest::random_complex(gen, 3, 3);
  EXPECT_EQ(devectorize(vectorize(m)), m);
  EXPECT_THROW(devectorize(CVector::Zero(5)), DimensionError);
}

TEST(Embedding, RoundTripAndPurity) {
  std::mt19937_64 gen(9);
  const Vector v = Vector::Random(18);
  EXPECT_EQ(embed_state(unembed_state(v)).values, v);
  for (int k = 0; k < 100; ++k) {
    const CMatrix h = selftest::random_hermitian(gen, 3);
    const double p = (h * h).trace().real();
    EXPECT_NEAR(embed_state(vectorize(h)).values.squaredNorm(), p, 1e-12 * std::max(1.0, p));
  }
}

TEST(Liouvillian, TwoLevelMatchesHandExpansion) {
  const double e = 1.3, gamma = 0.2, u = 0.7;
  const Liouvillian l = build_liouvillian(two_level_spec(e, gamma), Vector::Constant(1, u));
  // Order of vec entries: rho00, rho10, rho01, rho11.
  CMatrix expect(4, 4);
  expect << 0.0, -I1 * u, I1 * u, gamma,
      -I1 * u, -I1 * e - gamma / 2, 0.0, I1 * u,
      I1 * u, 0.0, I1 * e - gamma / 2, -I1 * u,
      0.0, I1 * u, -I1 * u, -gamma;
  EXPECT_LE(max_abs(l.complex_matrix - expect), 1e-15);
  // The two coherence rows carry conjugate phases.
  EXPECT_NEAR(l.complex_matrix(1, 1).imag(), -e, 1e-15);
  EXPECT_NEAR(l.complex_matrix(2, 2).imag(), e, 1e-15);
}

TEST(Liouvillian, DiagonalHamiltonianWithoutDissipation) {
  LindbladSpec s;
  s.drift = CMatrix::Zero(3, 3);
  s.drift.diagonal() << 0.0, 0.4, 1.9;
  const Liouvillian l = build_liouvillian(s, Vector(0));
  CMatrix expect = CMatrix::Zero(9, 9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) expect(j * 3 + i, j * 3 + i) = -I1 * (s.drift(i, i) - s.drift(j, j));
  EXPECT_LE(max_abs(l.complex_matrix - expect), 1e-15);
}

TEST(Liouvillian, AgreesWithRhs) {
  std::mt19937_64 gen(13);
  const auto spec = selftest::random_model(gen);
  for (int k = 0; k < 20; ++k) {
    const auto rho = selftest::random_density(gen, 3);
    const Vector u = Vector::Random(2);
    const Liouvillian l = build_liouvillian(spec, u);
    EXPECT_LE((vectorize(lindblad_rhs(rho, spec, u)) - l.complex_matrix * vectorize(rho)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Liouvillian, TracePreservation) {
  std::mt19937_64 gen(15);
  const auto spec = selftest::random_model(gen);
  const Liouvillian l = build_liouvillian(spec, Vector::Random(2));
  const CVector vec_id = vectorize(CMatrix(CMatrix::Identity(3, 3)));
  EXPECT_LE((vec_id.adjoint() * l.complex_matrix).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Liouvillian, AffineInControl) {
  std::mt19937_64 gen(17);
  const auto spec = selftest::random_model(gen);
  const AffineLiouvillian aff(spec);
  const Vector u = Vector::Random(2) * 3.0;
  const Liouvillian direct = build_liouvillian(spec, u);
  CMatrix sum = aff.drift().complex_matrix;
  for (int l = 0; l < 2; ++l) sum += u(l) * aff.channel(l).complex_matrix;
  EXPECT_EQ(aff.at(u).complex_matrix, sum);
  EXPECT_LE(max_abs(direct.complex_matrix - sum), 1e-13);
  EXPECT_LE((aff.real_at(u) - real_embed(sum)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(aff.real_at(Vector::Zero(3)), DimensionError);
}

TEST(RealEmbed, PurePhase) {
  const CMatrix l = I1 * CMatrix::Identity(2, 2);
  Matrix expect = Matrix::Zero(4, 4);
  expect.topRightCorner(2, 2) = -Matrix::Identity(2, 2);
  expect.bottomLeftCorner(2, 2) = Matrix::Identity(2, 2);
  EXPECT_EQ(real_embed(l), expect);
}

TEST(RealEmbed, ActionMatchesComplex) {
  std::mt19937_64 gen(19);
  for (int k = 0; k < 10; ++k) {
    const CMatrix l = selftest::random_complex(gen, 4, 4);
    const CVector v = selftest::random_complex(gen, 4, 1);
    EXPECT_LE((unembed_state(real_embed(l) * embed_state(v).values) - l * v).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(RealEmbed, SpectrumIsUnionWithConjugates) {
  const Liouvillian l = build_liouvillian(two_level_spec(1.0, 0.1), Vector::Constant(1, 0.8));
  const Eigen::VectorXcd complex_eig = Eigen::ComplexEigenSolver<CMatrix>(l.complex_matrix).eigenvalues();
  const Eigen::VectorXcd real_eig = Eigen::EigenSolver<Matrix>(l.real_matrix).eigenvalues();
  ASSERT_EQ(real_eig.size(), 2 * complex_eig.size());
  std::vector<cplx> expected;
  for (const auto& z : complex_eig) {
    expected.push_back(z);
    expected.push_back(std::conj(z));
  }
  // Greedy matching: each real-embedding eigenvalue consumes its nearest expected value.
  for (const auto& z : real_eig) {
    auto best = expected.begin();
    for (auto it = expected.begin(); it != expected.end(); ++it)
      if (std::abs(*it - z) < std::abs(*best - z)) best = it;
    EXPECT_LE(std::abs(*best - z), 1e-9);
    expected.erase(best);
  }
}

TEST(TraceFunctional, ReadsRealTrace) {
  std::mt19937_64 gen(21);
  const auto rho = selftest::random_density(gen, 3);
  EXPECT_NEAR(trace_functional(3).dot(embed(rho).values), 1.0, 1e-15);
}
