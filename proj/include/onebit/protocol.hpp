#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "onebit/channel.hpp"
#include "onebit/error.hpp"
#include "onebit/linsys.hpp"

namespace onebit {

/// Euclidean projection onto [-radius, radius].
inline double project(double v, double radius) {
  require(radius > 0.0, ErrorCode::NonPositiveRadius, "projection radius must be positive");
  return std::min(std::max(v, -radius), radius);
}

/// Recursive projection estimator over all edges of the union order.
class EstimatorState {
 public:
  EstimatorState(std::vector<double> initial, double radius, double beta)
      : z_(std::move(initial)), radius_(radius), beta_(beta) {
    require(radius > 0.0, ErrorCode::NonPositiveRadius, "projection radius must be positive");
    for (double v : z_)
      require(std::abs(v) <= radius, ErrorCode::ValidationError,
              "initial estimate exceeds the projection radius");
  }

  const std::vector<double>& z_hat() const { return z_; }
  double radius() const { return radius_; }
  double beta() const { return beta_; }

  /// One step at time t. `received[s]` carries the bit (or, in tests, any real
  /// signal) for active edges and must be empty exactly where `active[s]` is 0.
  /// Inactive entries are left untouched.
  void step(std::span<const std::optional<double>> received, std::span<const double> thresholds,
            const NoiseModel& noise, std::span<const char> active, long long t) {
    require(received.size() == z_.size() && active.size() == z_.size() &&
                thresholds.size() == z_.size(),
            ErrorCode::MaskMismatch, "bit, mask and threshold vectors must match the edge count");
    require(t >= 1, ErrorCode::ValidationError, "estimator time index must be positive");
    const double gain = beta_ / static_cast<double>(t);
    for (std::size_t s = 0; s < z_.size(); ++s) {
      require(received[s].has_value() == (active[s] != 0), ErrorCode::MaskMismatch,
              "bits must be supplied exactly for the active edges");
      if (!active[s]) continue;
      const double innovation = cdf(noise, thresholds[s] - z_[s]) - *received[s];
      z_[s] = project(z_[s] + gain * innovation, radius_);
    }
  }

 private:
  std::vector<double> z_;
  double radius_;
  double beta_;
};

struct ControllerConfig {
  GainPair gains;  // original frame
  double gamma = 0.0;
};

/// u_i = K1 x_i + gamma/(t+1) * sum_j (z_ij - K2 x_i)
inline double control_input(const Vector& x_i, std::span<const double> neighbor_estimates,
                            const ControllerConfig& cfg, long long t) {
  require(x_i.size() == cfg.gains.K1.size() && x_i.size() == cfg.gains.K2.size(),
          ErrorCode::DimensionMismatch, "state and gain lengths differ");
  const double z_i = cfg.gains.K2.dot(x_i);
  double sum = 0.0;
  for (double z : neighbor_estimates) sum += z - z_i;
  return cfg.gains.K1.dot(x_i) + cfg.gamma / static_cast<double>(t + 1) * sum;
}

/// x_i(t+1) = A x_i + B u_i
inline Vector agent_step(const Vector& x_i, double u_i, const LinearSystem& sys) {
  require(x_i.size() == sys.n(), ErrorCode::DimensionMismatch, "state length differs from n");
  return sys.A() * x_i + sys.B() * u_i;
}

/// Right-hand side of the scalar recursion satisfied by K2 x_i when
/// K2(A+BK1) = K2 and K2 B = 1:
///   K2 x_i(t+1) = (1 - gamma d_i/(t+1)) K2 x_i(t) + gamma/(t+1) sum_j z_ij.
inline double compressed_recursion(double k2x, std::span<const double> neighbor_estimates,
                                   double gamma, long long t) {
  const double w = gamma / static_cast<double>(t + 1);
  double sum = 0.0;
  for (double z : neighbor_estimates) sum += z;
  return (1.0 - w * static_cast<double>(neighbor_estimates.size())) * k2x + w * sum;
}

}  // namespace onebit
