#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onebit/channel.hpp"
#include "onebit/engine.hpp"
#include "onebit/error.hpp"
#include "onebit/linsys.hpp"
#include "onebit/topology.hpp"

namespace onebit {

struct TheoremConstants {
  double lambda2 = 0.0;
  double lambda_G = 0.0;
  double lambda_QW = 0.0;
  double lambda_QL = 0.0;
  double alpha = 0.0;
  double f_M = 0.0;
  double pi_min = 1.0;
  int d_max = 0;
};

/// Largest singular value squared, from the Gram matrix.
inline double spectral_norm_squared(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  const Matrix gram = m.rows() <= m.cols() ? Matrix(m * m.transpose()) : Matrix(m.transpose() * m);
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

/// Constants of the convergence theorems. With one graph this is the fixed
/// case (pi_min = 1); otherwise maxima over the graphs and lambda2 of the
/// expected Laplacian. lambda_G always uses ||T^T J_N W_i||^2, which equals
/// ||J_N W||^2 for a single graph because T is orthogonal.
inline TheoremConstants theorem_constants(const MarkovTopologyProcess& topo, const LinkConfig& link,
                                          double radius) {
  require(radius > 0.0, ErrorCode::NonPositiveRadius, "M must be positive");
  const bool switching = topo.size() > 1;
  require(topo.jointly_connected(),
          switching ? ErrorCode::NotJointlyConnected : ErrorCode::NotConnected,
          switching ? "switching graphs are not jointly connected" : "graph is not connected");
  const auto& edges = topo.union_graph().edges();
  require(link.thresholds.size() == edges.size(), ErrorCode::DimensionMismatch,
          "one threshold per directed edge is required");

  const int n = topo.agents();
  const Matrix lbar = expected_laplacian(topo);
  const auto diag = orthogonal_diagonalizer(lbar);
  const Matrix j = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
  const Matrix tj = diag.T.transpose() * j;

  TheoremConstants k;
  k.lambda2 = symmetric_spectrum(lbar).lambda2();
  k.d_max = topo.union_graph().max_degree();
  for (int u = 0; u < topo.size(); ++u) {
    const auto& sel = topo.selection(u);
    const Matrix lu = topo.graphs()[static_cast<std::size_t>(u)].laplacian();
    k.lambda_G = std::max(k.lambda_G, spectral_norm_squared(tj * sel.W));
    k.lambda_QW = std::max(k.lambda_QW, spectral_norm_squared(sel.Q * sel.W));
    k.lambda_QL = std::max(k.lambda_QL, spectral_norm_squared(sel.Q * lu * diag.T));
  }
  k.alpha = 2.0 * std::sqrt(k.lambda_QW) + k.lambda_QL * k.lambda2 / k.lambda_G;
  k.f_M = std::numeric_limits<double>::infinity();
  for (double c : link.thresholds)
    k.f_M = std::min(k.f_M, normal_pdf(std::abs(c) + radius, link.noise.sigma()));
  k.pi_min = topo.pi().minCoeff();
  return k;
}

enum class Regime { SubLinear, LogLinear, Linear };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::SubLinear: return "O(t^-lambda)";
    case Regime::LogLinear: return "O(ln t / t)";
    case Regime::Linear: return "O(1/t)";
  }
  return "unknown";
}

struct RateReport {
  double lambda_min_U = 0.0;
  Regime regime = Regime::SubLinear;
  double beta_threshold_consensus = 0.0;
  std::optional<double> beta_threshold_rate;  // empty when gamma <= 1/lambda2
  double gamma_threshold = 0.0;
};

struct BetaThresholds {
  double consensus = 0.0;
  double rate = 0.0;
  double gamma_threshold = 0.0;
};

/// Consensus threshold of the mean-square theorem; the rate threshold needs
/// gamma > 1/lambda2 and throws GammaTooSmall otherwise.
inline double beta_threshold_consensus(const TheoremConstants& k, double gamma) {
  require(gamma > 0.0, ErrorCode::ValidationError, "gamma must be positive");
  const double scale = 1.0 / (2.0 * k.f_M * k.pi_min);
  return scale * (gamma * k.lambda_G * k.lambda_G / std::pow(k.lambda2, 3) + gamma * k.alpha);
}

inline double beta_threshold_rate(const TheoremConstants& k, double gamma) {
  require(gamma > 0.0, ErrorCode::ValidationError, "gamma must be positive");
  require(gamma * k.lambda2 > 1.0, ErrorCode::GammaTooSmall,
          "rate threshold needs gamma > 1/lambda2 = " + std::to_string(1.0 / k.lambda2));
  const double scale = 1.0 / (2.0 * k.f_M * k.pi_min);
  return scale * (gamma * gamma * k.lambda_G * k.lambda_G /
                      (k.lambda2 * k.lambda2 * (gamma * k.lambda2 - 1.0)) +
                  gamma * k.alpha + 1.0);
}

inline BetaThresholds beta_thresholds(const TheoremConstants& k, double gamma) {
  return {beta_threshold_consensus(k, gamma), beta_threshold_rate(k, gamma), 1.0 / k.lambda2};
}

/// Smallest eigenvalue of [[u1, u2], [u2, u4]].
inline double lambda_min_2x2(double u1, double u2, double u4) {
  const double half_gap = 0.5 * (u1 - u4);
  return 0.5 * (u1 + u4) - std::sqrt(half_gap * half_gap + u2 * u2);
}

inline Regime classify_regime(double lambda_min) {
  if (lambda_min < 1.0) return Regime::SubLinear;
  if (lambda_min == 1.0) return Regime::LogLinear;
  return Regime::Linear;
}

struct ULambda {
  double value = 0.0;
  Regime regime = Regime::SubLinear;
};

inline ULambda lambda_min_U(double beta, double gamma, const TheoremConstants& k) {
  const double u1 = gamma * k.lambda2;
  const double u2 = gamma * k.lambda_G / k.lambda2;
  const double u4 = 2.0 * beta * k.f_M * k.pi_min - gamma * k.alpha;
  const double v = lambda_min_2x2(u1, u2, u4);
  return {v, classify_regime(v)};
}

inline RateReport rate_report(double beta, double gamma, const TheoremConstants& k) {
  RateReport r;
  const auto u = lambda_min_U(beta, gamma, k);
  r.lambda_min_U = u.value;
  r.regime = u.regime;
  r.beta_threshold_consensus = beta_threshold_consensus(k, gamma);
  if (gamma * k.lambda2 > 1.0) r.beta_threshold_rate = beta_threshold_rate(k, gamma);
  r.gamma_threshold = 1.0 / k.lambda2;
  return r;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
  double t_lo = 0.0;
  double t_hi = 0.0;
};

/// OLS of log(value) on log(t) over the points with t in [t_lo, t_hi].
inline SlopeFit rate_slope(std::span<const double> t, std::span<const double> value, double t_lo,
                           double t_hi) {
  require(t.size() == value.size(), ErrorCode::DimensionMismatch, "time and metric lengths differ");
  require(t_lo > 0.0 && t_lo < t_hi, ErrorCode::InvalidWindow, "slope window must satisfy 0 < lo < hi");
  require(!t.empty() && t_lo >= t.front() && t_hi <= t.back(), ErrorCode::InvalidWindow,
          "slope window lies outside the trace");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    require(value[i] > 0.0 && std::isfinite(value[i]), ErrorCode::NonPositiveMetric,
            "metric must be positive inside the slope window (t = " + std::to_string(t[i]) + ")");
    const double x = std::log(t[i]);
    const double y = std::log(value[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
    ++count;
  }
  require(count >= 2, ErrorCode::InvalidWindow, "slope window holds fewer than two points");
  const double cn = static_cast<double>(count);
  const double vx = sxx - sx * sx / cn;
  const double vy = syy - sy * sy / cn;
  const double cxy = sxy - sx * sy / cn;
  require(vx > 0.0, ErrorCode::InvalidWindow, "slope window has no spread in t");
  SlopeFit f;
  f.slope = cxy / vx;
  f.intercept = (sy - f.slope * sx) / cn;
  f.r2 = vy > 0.0 ? cxy * cxy / (vx * vy) : 1.0;
  f.points = count;
  f.t_lo = t_lo;
  f.t_hi = t_hi;
  return f;
}

enum class Metric { MaxConsensusError, V, R };

inline std::vector<double> metric_series(const EnsembleMetrics& m, Metric which) {
  switch (which) {
    case Metric::MaxConsensusError: return m.max_cons_err;
    case Metric::V: return m.V_mean;
    case Metric::R: return m.R_mean;
  }
  return {};
}

/// Last two decades of the recorded horizon.
inline std::pair<double, double> default_slope_window(const EnsembleMetrics& m) {
  require(!m.t.empty(), ErrorCode::InvalidWindow, "empty trace");
  const double hi = static_cast<double>(m.t.back());
  return {std::max(static_cast<double>(m.t.front()), hi / 100.0), hi};
}

inline SlopeFit rate_slope(const EnsembleMetrics& m, Metric which,
                           std::optional<std::pair<double, double>> window = {}) {
  const auto w = window ? *window : default_slope_window(m);
  std::vector<double> t(m.t.begin(), m.t.end());
  const auto v = metric_series(m, which);
  return rate_slope(t, v, w.first, w.second);
}

struct OracleResult {
  std::vector<double> xi;  // xi(0), xi(1), ...
  std::optional<double> limit;
  std::vector<std::complex<double>> roots;
};

/// Iterates xi(t+m) + b_m xi(t+m-1) + ... + b_1 xi(t) = eta(t), m = b.size(),
/// from zero initial conditions. xi has eta.size() + m entries.
/// The limit is eta* / prod(1 - r_j) over the roots r_j of the characteristic polynomial.
inline OracleResult difference_equation_oracle(const std::vector<double>& b,
                                               std::span<const double> eta,
                                               std::optional<double> eta_limit = {}) {
  const auto stab = check_compression_stability(b);
  require(stab.stable, ErrorCode::UnstableCoefficients,
          "difference-equation coefficients have a root on or outside the unit circle");
  for (double e : eta) require(std::isfinite(e), ErrorCode::NonFinite, "eta must be finite");
  const std::size_t m = b.size();
  OracleResult r;
  r.roots = stab.roots;
  r.xi.assign(m + eta.size(), 0.0);
  for (std::size_t t = 0; t < eta.size(); ++t) {
    double acc = eta[t];
    for (std::size_t k = 0; k < m; ++k) acc -= b[k] * r.xi[t + k];
    r.xi[t + m] = acc;
  }
  if (eta_limit) {
    std::complex<double> prod = 1.0;
    for (const auto& z : r.roots) prod *= (1.0 - z);
    r.limit = *eta_limit / prod.real();
  }
  return r;
}

struct IdentityReport {
  double max_residual = 0.0;
  std::size_t checked = 0;
};

/// Along a canonical-frame trace recorded at every step, checks
///   sum_k K2_k x_{i,n}(t+k-1) = (K2 x_i)(t+n-1)
/// which ties the last state coordinate to the compressed state.
inline IdentityReport verify_original_from_compressed(const Trace& trace, const RowVector& k2) {
  const int n = trace.n;
  require(k2.size() == n, ErrorCode::DimensionMismatch, "gain length must equal n");
  require(static_cast<int>(trace.rows.size()) >= n, ErrorCode::InsufficientHorizon,
          "trace shorter than the state dimension");
  for (std::size_t r = 1; r < trace.rows.size(); ++r)
    require(trace.rows[r].t == trace.rows[r - 1].t + 1, ErrorCode::InsufficientHorizon,
            "identity check needs a trace recorded at every step");
  IdentityReport rep;
  auto coord = [&](std::size_t row, int agent, int k) {
    return trace.rows[row].x[static_cast<std::size_t>(agent * n + k)];
  };
  for (std::size_t t = 0; t + static_cast<std::size_t>(n) <= trace.rows.size(); ++t) {
    for (int i = 0; i < trace.agents; ++i) {
      double lhs = 0.0;
      for (int k = 0; k < n; ++k) lhs += k2(k) * coord(t + static_cast<std::size_t>(k), i, n - 1);
      const std::size_t later = t + static_cast<std::size_t>(n - 1);
      double rhs = 0.0;
      for (int k = 0; k < n; ++k) rhs += k2(k) * coord(later, i, k);
      rep.max_residual = std::max(rep.max_residual, std::abs(lhs - rhs));
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace onebit
