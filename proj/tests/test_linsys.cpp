#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "fixtures.hpp"
#include "onebit/linsys.hpp"

using namespace onebit;

namespace {

// Gaussian elimination with partial pivoting, counting pivots above tol.
int row_reduce_rank(Matrix m, double tol = 1e-10) {
  int rank = 0;
  const auto rows = m.rows(), cols = m.cols();
  for (Eigen::Index c = 0; c < cols && rank < rows; ++c) {
    Eigen::Index piv = rank;
    for (Eigen::Index r = rank; r < rows; ++r)
      if (std::abs(m(r, c)) > std::abs(m(piv, c))) piv = r;
    if (std::abs(m(piv, c)) <= tol) continue;
    m.row(piv).swap(m.row(rank));
    for (Eigen::Index r = rank + 1; r < rows; ++r) m.row(r) -= m(r, c) / m(rank, c) * m.row(rank);
    ++rank;
  }
  return rank;
}

double rel_frobenius(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace

TEST(LinearSystem, RejectsMalformedInput) {
  EXPECT_THROW(LinearSystem(Matrix::Zero(2, 3), Vector::Zero(2)), Error);
  EXPECT_THROW(LinearSystem(Matrix::Zero(2, 2), Vector::Zero(3)), Error);
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = std::nan("");
  try {
    LinearSystem s(a, Vector::Ones(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFinite);
  }
}

TEST(Controllability, CompanionFormHasFullRank) {
  for (int n = 1; n <= 6; ++n) {
    Vector a = Vector::LinSpaced(n, -0.5, 0.7);
    LinearSystem sys(companion_from_last_row(a), last_unit_vector(n));
    EXPECT_EQ(controllability_rank(sys), n);
  }
}

TEST(Controllability, IdentityWithUnitInputHasRankOne) {
  Vector b(2);
  b << 1, 0;
  EXPECT_EQ(controllability_rank(LinearSystem(Matrix::Identity(2, 2), b)), 1);
}

TEST(Controllability, ScalarRankDependsOnInput) {
  EXPECT_EQ(controllability_rank(LinearSystem(Matrix::Constant(1, 1, 0.3), Vector::Constant(1, 2.0))), 1);
  EXPECT_EQ(controllability_rank(LinearSystem(Matrix::Constant(1, 1, 0.3), Vector::Zero(1))), 0);
}

TEST(Controllability, AircraftPairHasRankFourByRowReduction) {
  const Matrix c = controllability_matrix(fixtures::aircraft_Ad(), fixtures::aircraft_Bd());
  EXPECT_EQ(row_reduce_rank(c), 4);
  EXPECT_EQ(controllability_rank(LinearSystem(fixtures::aircraft_Ad(), fixtures::aircraft_Bd())), 4);
}

TEST(Brunovsky, CanonicalInputGivesIdentityTransform) {
  Vector a(3);
  a << 0.2, -0.1, 0.5;
  const auto cf = to_brunovsky(LinearSystem(companion_from_last_row(a), last_unit_vector(3)));
  EXPECT_LE((cf.P - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((cf.a - a).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Brunovsky, ScalarCase) {
  const auto cf = to_brunovsky(LinearSystem(Matrix::Constant(1, 1, 0.7), Vector::Constant(1, 4.0)));
  EXPECT_NEAR(cf.P(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(cf.A_tilde(0, 0), 0.7, 1e-15);
  EXPECT_EQ(cf.B_tilde(0), 1.0);
}

TEST(Brunovsky, AircraftRoundTripResidual) {
  const LinearSystem sys(fixtures::aircraft_Ad(), fixtures::aircraft_Bd());
  const auto cf = to_brunovsky(sys);
  EXPECT_LT(cf.residual, 1e-9);
  EXPECT_LT(rel_frobenius(cf.P * sys.A() * cf.P.inverse(), cf.A_tilde), 1e-9);
  EXPECT_FALSE(cf.ill_conditioned);
  // Structure: superdiagonal ones, last unit input.
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(cf.A_tilde(i, j), j == i + 1 ? 1.0 : 0.0);
  EXPECT_EQ(cf.B_tilde, last_unit_vector(4));
}

TEST(Brunovsky, CharacteristicPolynomialSignConvention) {
  // det(sI - A_tilde) = s^n - a_n s^{n-1} - ... - a_1: eigenvalues of A equal roots of that polynomial.
  const LinearSystem sys(fixtures::aircraft_Ad(), fixtures::aircraft_Bd());
  const auto cf = to_brunovsky(sys);
  Eigen::EigenSolver<Matrix> es(sys.A());
  for (Eigen::Index k = 0; k < 4; ++k) {
    const std::complex<double> s = es.eigenvalues()(k);
    std::complex<double> p = std::pow(s, 4);
    for (int j = 0; j < 4; ++j) p -= cf.a(j) * std::pow(s, j);
    EXPECT_LT(std::abs(p), 1e-9);
  }
}

TEST(Brunovsky, RejectsUncontrollable) {
  Vector b(2);
  b << 1, 0;
  try {
    to_brunovsky(LinearSystem(Matrix::Identity(2, 2), b));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotControllable);
  }
}

TEST(Brunovsky, RandomRoundTripProperty) {
  std::mt19937_64 rng(2024);
  for (int seed = 0; seed < 200; ++seed) {
    const int n = 1 + seed % 6;
    const auto sys = fixtures::random_system(rng, n);
    const auto cf = to_brunovsky(sys);
    const Matrix pinv = cf.P.inverse();
    EXPECT_LT(rel_frobenius(pinv * cf.A_tilde * cf.P, sys.A()), 1e-8) << "seed " << seed;
    EXPECT_LT(rel_frobenius(pinv * cf.B_tilde, sys.B()), 1e-8) << "seed " << seed;
  }
}

TEST(CompressionStability, Examples) {
  const auto zero = check_compression_stability({0.0, 0.0, 0.0});
  EXPECT_TRUE(zero.stable);
  for (const auto& r : zero.roots) EXPECT_LT(std::abs(r), 1e-12);

  const auto boundary = check_compression_stability({1.0});
  EXPECT_FALSE(boundary.stable);
  ASSERT_EQ(boundary.roots.size(), 1u);
  EXPECT_NEAR(boundary.roots[0].real(), -1.0, 1e-12);

  const auto dbl = check_compression_stability({0.25, 1.0});
  EXPECT_TRUE(dbl.stable);
  for (const auto& r : dbl.roots) EXPECT_NEAR(std::abs(r + 0.5), 0.0, 1e-6);

  const auto empty = check_compression_stability({});
  EXPECT_TRUE(empty.stable);
  EXPECT_TRUE(empty.roots.empty());
}

TEST(GainSynthesis, ScalarCase) {
  const LinearSystem sys(Matrix::Constant(1, 1, 0.4), Vector::Ones(1));
  const auto g = synthesize_gains(sys, to_brunovsky(sys), {});
  EXPECT_NEAR(g.canonical.K1(0), 0.6, 1e-15);
  EXPECT_EQ(g.canonical.K2(0), 1.0);
  EXPECT_NEAR((sys.A() + sys.B() * g.original.K1)(0, 0), 1.0, 1e-15);
}

TEST(GainSynthesis, CanonicalK2EndsInOneAndTimesBIsOne) {
  const LinearSystem sys(fixtures::aircraft_Ad(), fixtures::aircraft_Bd());
  const auto cf = to_brunovsky(sys);
  const auto g = synthesize_gains(sys, cf, {0.1, -0.2, 0.3});
  EXPECT_EQ(g.canonical.K2(3), 1.0);
  EXPECT_EQ(g.canonical.K2.dot(cf.B_tilde), 1.0);
  EXPECT_EQ(g.canonical.K2(0), 0.1);
  EXPECT_EQ(g.canonical.K2(1), -0.2);
}

TEST(GainSynthesis, RejectsUnstableCompression) {
  const LinearSystem sys(fixtures::aircraft_Ad(), fixtures::aircraft_Bd());
  try {
    synthesize_gains(sys, to_brunovsky(sys), {0.0, 0.0, 1.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnstableCompression);
  }
}

TEST(GainSynthesis, PublishedAircraftGainsSatisfyIdentitiesToRounding) {
  const auto r = gain_residuals(fixtures::aircraft_Ad(), fixtures::aircraft_Bd(), fixtures::aircraft_K1(),
                                fixtures::aircraft_K2());
  EXPECT_LE(r.k2b, 2e-4);
  EXPECT_LE(r.closed_loop, 2e-3);
}

TEST(GainSynthesis, IdentityAndEigenvalueTransferProperty) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    const auto sys = fixtures::random_system(rng, n);
    const auto cf = to_brunovsky(sys);
    const auto b = fixtures::random_stable_coefficients(rng, n - 1, 0.8);
    const auto g = synthesize_gains(sys, cf, b);
    for (const auto* pair : {&g.canonical, &g.original}) {
      const bool canon = pair == &g.canonical;
      const auto res = canon ? gain_residuals(cf.A_tilde, cf.B_tilde, pair->K1, pair->K2)
                             : gain_residuals(sys, *pair);
      EXPECT_LE(res.k2b, 1e-6);
      EXPECT_LE(res.closed_loop, 1e-6);
    }
    // eig(A + B K1) = {1} + compression roots
    Eigen::EigenSolver<Matrix> es(sys.A() + sys.B() * g.original.K1);
    std::vector<std::complex<double>> expected = compression_roots(b);
    expected.push_back(1.0);
    std::vector<bool> used(expected.size(), false);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
      double best = 1e300;
      std::size_t at = 0;
      for (std::size_t j = 0; j < expected.size(); ++j)
        if (!used[j] && std::abs(expected[j] - es.eigenvalues()(k)) < best) {
          best = std::abs(expected[j] - es.eigenvalues()(k));
          at = j;
        }
      used[at] = true;
      // repeated roots are perturbed at sqrt-eps scale
      EXPECT_LT(best, 1e-5) << "trial " << trial;
    }
  }
}

TEST(MatrixExponential, AgreesWithIndependentImplementation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 8;
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = u(rng);
    const Matrix ours = matrix_exponential(m);
    const Matrix ref = m.exp();
    EXPECT_LT(rel_frobenius(ours, ref), 1e-12) << "trial " << trial;
  }
}

TEST(Zoh, ZeroDynamicsIntegratesInput) {
  Vector b(3);
  b << 1, -2, 0.5;
  const auto d = zoh_discretize(LinearSystem(Matrix::Zero(3, 3), b, TimeKind::Continuous), 0.7);
  EXPECT_LT((d.A() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((d.B() - 0.7 * b).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Zoh, ScalarClosedForm) {
  const auto d = zoh_discretize(LinearSystem(Matrix::Constant(1, 1, -1.0), Vector::Ones(1), TimeKind::Continuous), 1.0);
  EXPECT_NEAR(d.A()(0, 0), std::exp(-1.0), 1e-14);
  EXPECT_NEAR(d.B()(0), 1.0 - std::exp(-1.0), 1e-14);
}

TEST(Zoh, AircraftMatchesPrintedDiscretePair) {
  const auto d = zoh_discretize(LinearSystem(fixtures::aircraft_Ac(), fixtures::aircraft_Bc(), TimeKind::Continuous), 0.5);
  EXPECT_LE((d.A() - fixtures::aircraft_Ad()).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LE((d.B() - fixtures::aircraft_Bd()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Zoh, PrintedContinuousInputColumnDoesNotReproducePrintedBd) {
  const auto d = zoh_discretize(
      LinearSystem(fixtures::aircraft_Ac(), fixtures::aircraft_Bc_as_printed(), TimeKind::Continuous), 0.5);
  EXPECT_LE((d.A() - fixtures::aircraft_Ad()).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_GT((d.B() - fixtures::aircraft_Bd()).cwiseAbs().maxCoeff(), 0.1);
}

TEST(Zoh, SemigroupProperty) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6;
    Matrix a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = u(rng);
    const LinearSystem sys(a, Vector::Ones(n), TimeKind::Continuous);
    const double t1 = 0.3 + 0.05 * trial, t2 = 0.2;
    const Matrix lhs = zoh_discretize(sys, t1 + t2).A();
    const Matrix rhs = zoh_discretize(sys, t1).A() * zoh_discretize(sys, t2).A();
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Zoh, RejectsBadInput) {
  const LinearSystem cont(Matrix::Zero(1, 1), Vector::Ones(1), TimeKind::Continuous);
  try {
    zoh_discretize(cont, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositivePeriod);
  }
  try {
    zoh_discretize(LinearSystem(Matrix::Zero(1, 1), Vector::Ones(1)), 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotContinuous);
  }
}
