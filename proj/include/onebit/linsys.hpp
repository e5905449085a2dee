#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "onebit/error.hpp"

namespace onebit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class TimeKind { Continuous, Discrete };

/// Single-input linear system x+ = A x + B u (or xdot = A x + B u).
class LinearSystem {
 public:
  LinearSystem(Matrix a, Vector b, TimeKind kind = TimeKind::Discrete)
      : a_(std::move(a)), b_(std::move(b)), kind_(kind) {
    require(a_.rows() >= 1 && a_.rows() == a_.cols(), ErrorCode::DimensionMismatch,
            "A must be square and non-empty");
    require(b_.size() == a_.rows(), ErrorCode::DimensionMismatch,
            "B must have exactly n rows and one column");
    require(a_.allFinite() && b_.allFinite(), ErrorCode::NonFinite,
            "system matrices must be finite");
  }

  const Matrix& A() const { return a_; }
  const Vector& B() const { return b_; }
  int n() const { return static_cast<int>(a_.rows()); }
  TimeKind kind() const { return kind_; }

 private:
  Matrix a_;
  Vector b_;
  TimeKind kind_;
};

/// [B, AB, ..., A^{n-1}B]
inline Matrix controllability_matrix(const Matrix& a, const Vector& b) {
  const auto n = a.rows();
  Matrix c(n, n);
  Vector col = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    c.col(k) = col;
    col = a * col;
  }
  return c;
}

inline Matrix controllability_matrix(const LinearSystem& sys) {
  return controllability_matrix(sys.A(), sys.B());
}

/// Numerical rank with threshold n * eps * sigma_max.
inline int numerical_rank(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  const double tol = static_cast<double>(std::max(m.rows(), m.cols())) *
                     std::numeric_limits<double>::epsilon() * sv(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol) ++rank;
  return rank;
}

inline int controllability_rank(const LinearSystem& sys) {
  return numerical_rank(controllability_matrix(sys));
}

inline double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  return smin == 0.0 ? std::numeric_limits<double>::infinity() : sv(0) / smin;
}

/// Companion matrix whose last row holds a_1..a_n, so that
/// det(sI - A) = s^n - a_n s^{n-1} - ... - a_1.
inline Matrix companion_from_last_row(const Vector& a) {
  const auto n = a.size();
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) m(i, i + 1) = 1.0;
  m.row(n - 1) = a.transpose();
  return m;
}

inline Vector last_unit_vector(Eigen::Index n) {
  Vector e = Vector::Zero(n);
  e(n - 1) = 1.0;
  return e;
}

struct CanonicalForm {
  Matrix P;        // P A P^{-1} = A_tilde, P B = B_tilde
  Matrix A_tilde;
  Vector B_tilde;
  Vector a;        // last row of A_tilde
  double condition = 1.0;
  bool ill_conditioned = false;
  double residual = 0.0;  // max relative Frobenius residual of the two identities
};

inline constexpr double kIllConditionedLimit = 1e12;

/// Brunovsky canonical form via P = C_tilde * C^{-1}. The companion row comes
/// from Cayley-Hamilton: A^n B = C a, so a = C^{-1} A^n B.
inline CanonicalForm to_brunovsky(const LinearSystem& sys) {
  const int n = sys.n();
  require(controllability_rank(sys) == n, ErrorCode::NotControllable,
          "(A, B) is not controllable");

  const Matrix c = controllability_matrix(sys);
  CanonicalForm out;
  out.condition = condition_number(c);
  out.ill_conditioned = out.condition > kIllConditionedLimit;

  Eigen::PartialPivLU<Matrix> lu(c);
  Vector an_b = sys.B();
  for (int k = 0; k < n; ++k) an_b = sys.A() * an_b;
  out.a = lu.solve(an_b);
  out.A_tilde = companion_from_last_row(out.a);
  out.B_tilde = last_unit_vector(n);

  const Matrix c_tilde = controllability_matrix(out.A_tilde, out.B_tilde);
  // P = C_tilde C^{-1}  <=>  C^T P^T = C_tilde^T
  out.P = c.transpose().partialPivLu().solve(c_tilde.transpose()).transpose();

  const double res_a = (out.P * sys.A() - out.A_tilde * out.P).norm() /
                       std::max(1.0, (out.A_tilde * out.P).norm());
  const double res_b = (out.P * sys.B() - out.B_tilde).norm();
  out.residual = std::max(res_a, res_b);
  return out;
}

struct StabilityReport {
  bool stable = true;
  std::vector<std::complex<double>> roots;
};

inline constexpr double kStabilityMargin = 1e-9;

/// Roots of s^{m} + b_m s^{m-1} + ... + b_2 s + b_1 (m = b.size()).
inline std::vector<std::complex<double>> compression_roots(const std::vector<double>& b) {
  const auto m = static_cast<Eigen::Index>(b.size());
  if (m == 0) return {};
  Matrix comp = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i + 1 < m; ++i) comp(i, i + 1) = 1.0;
  for (Eigen::Index k = 0; k < m; ++k) comp(m - 1, k) = -b[static_cast<std::size_t>(k)];
  Eigen::EigenSolver<Matrix> es(comp, false);
  std::vector<std::complex<double>> roots(es.eigenvalues().data(),
                                          es.eigenvalues().data() + m);
  return roots;
}

inline StabilityReport check_compression_stability(const std::vector<double>& b) {
  StabilityReport r;
  r.roots = compression_roots(b);
  for (const auto& z : r.roots)
    if (!(std::abs(z) < 1.0 - kStabilityMargin)) r.stable = false;
  return r;
}

enum class Frame { Canonical, Original };

struct GainPair {
  RowVector K1;
  RowVector K2;
  std::vector<double> b;  // empty when the gains were supplied directly
  Frame frame = Frame::Original;
};

struct GainResiduals {
  double k2b = 0.0;          // |K2 B - 1|
  double closed_loop = 0.0;  // ||K2 (A + B K1) - K2||_inf
};

inline GainResiduals gain_residuals(const Matrix& a, const Vector& b, const RowVector& k1,
                                    const RowVector& k2) {
  require(k1.size() == a.rows() && k2.size() == a.rows(), ErrorCode::DimensionMismatch,
          "gain length must equal n");
  GainResiduals r;
  r.k2b = std::abs(k2.dot(b) - 1.0);
  r.closed_loop = (k2 * (a + b * k1) - k2).cwiseAbs().maxCoeff();
  return r;
}

inline GainResiduals gain_residuals(const LinearSystem& sys, const GainPair& g) {
  return gain_residuals(sys.A(), sys.B(), g.K1, g.K2);
}

struct SynthesizedGains {
  GainPair canonical;
  GainPair original;
};

inline constexpr double kGainIdentityTol = 1e-6;

inline SynthesizedGains synthesize_gains(const LinearSystem& sys, const CanonicalForm& canon,
                                         const std::vector<double>& b) {
  const int n = sys.n();
  require(static_cast<int>(b.size()) == n - 1, ErrorCode::DimensionMismatch,
          "compression coefficients must have length n-1");
  require(check_compression_stability(b).stable, ErrorCode::UnstableCompression,
          "compression polynomial has a root on or outside the unit circle");

  // b_0 = 0 and b_n = 1 close the recursion K1_k = -a_k + b_k - b_{k-1}.
  auto bk = [&](int k) -> double {
    if (k <= 0) return 0.0;
    if (k >= n) return 1.0;
    return b[static_cast<std::size_t>(k - 1)];
  };
  SynthesizedGains g;
  g.canonical.frame = Frame::Canonical;
  g.canonical.b = b;
  g.canonical.K1.resize(n);
  g.canonical.K2.resize(n);
  for (int k = 1; k <= n; ++k) {
    g.canonical.K2(k - 1) = bk(k);
    g.canonical.K1(k - 1) = -canon.a(k - 1) + bk(k) - bk(k - 1);
  }
  g.original.frame = Frame::Original;
  g.original.b = b;
  g.original.K1 = g.canonical.K1 * canon.P;
  g.original.K2 = g.canonical.K2 * canon.P;

  const auto rc = gain_residuals(canon.A_tilde, canon.B_tilde, g.canonical.K1, g.canonical.K2);
  const auto ro = gain_residuals(sys, g.original);
  require(rc.k2b <= kGainIdentityTol && rc.closed_loop <= kGainIdentityTol &&
              ro.k2b <= kGainIdentityTol && ro.closed_loop <= kGainIdentityTol,
          ErrorCode::IdentityViolation,
          "K2(A+BK1)=K2 or K2B=1 violated (canonical " + std::to_string(rc.closed_loop) +
              ", original " + std::to_string(ro.closed_loop) + ")");
  return g;
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
inline Matrix matrix_exponential(const Matrix& m) {
  const double norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const Matrix scaled = m / std::ldexp(1.0, squarings);

  const auto n = m.rows();
  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() < 1e-18 * std::max(1.0, result.cwiseAbs().maxCoeff())) break;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

/// Zero-order-hold discretization through exp([[A, B], [0, 0]] T).
inline LinearSystem zoh_discretize(const LinearSystem& sys, double period) {
  require(sys.kind() == TimeKind::Continuous, ErrorCode::NotContinuous,
          "zero-order hold needs a continuous-time system");
  require(period > 0.0 && std::isfinite(period), ErrorCode::NonPositivePeriod,
          "sampling period must be positive");
  const int n = sys.n();
  Matrix aug = Matrix::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = sys.A();
  aug.topRightCorner(n, 1) = sys.B();
  const Matrix phi = matrix_exponential(aug * period);
  return LinearSystem(phi.topLeftCorner(n, n), phi.topRightCorner(n, 1), TimeKind::Discrete);
}

}  // namespace onebit
