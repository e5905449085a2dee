#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "onebit/error.hpp"
#include "onebit/linsys.hpp"

namespace onebit {

/// Zero-mean Gaussian link noise. sigma == 0 exists only through
/// `noiseless_for_testing()` and turns the quantizer into a plain indicator.
class NoiseModel {
 public:
  explicit NoiseModel(double sigma) : sigma_(sigma) {
    require(sigma > 0.0 && std::isfinite(sigma), ErrorCode::NonPositiveSigma,
            "noise standard deviation must be positive");
  }

  static NoiseModel noiseless_for_testing() { return NoiseModel(); }

  double sigma() const { return sigma_; }
  bool noiseless() const { return sigma_ == 0.0; }

 private:
  NoiseModel() = default;
  double sigma_ = 0.0;
};

/// F(v) for N(0, sigma^2).
inline double normal_cdf(double v, double sigma) {
  require(sigma > 0.0, ErrorCode::NonPositiveSigma, "sigma must be positive");
  return 0.5 * std::erfc(-v / (sigma * std::numbers::sqrt2));
}

/// f(v) for N(0, sigma^2).
inline double normal_pdf(double v, double sigma) {
  require(sigma > 0.0, ErrorCode::NonPositiveSigma, "sigma must be positive");
  const double r = v / sigma;
  return std::exp(-0.5 * r * r) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

inline double cdf(const NoiseModel& noise, double v) {
  if (noise.noiseless()) return v >= 0.0 ? 1.0 : 0.0;
  return normal_cdf(v, noise.sigma());
}

/// Per-edge thresholds c (canonical edge order) plus the noise law.
struct LinkConfig {
  std::vector<double> thresholds;
  NoiseModel noise;
};

/// z = K2 x
inline double encode(const RowVector& k2, const Vector& x) {
  require(k2.size() == x.size(), ErrorCode::DimensionMismatch, "K2 and x lengths differ");
  return k2.dot(x);
}

/// One bit: 1{z + noise <= c}. Draws exactly one Gaussian variate.
template <class Generator>
int transmit(double z, double threshold, const NoiseModel& noise, Generator& gen) {
  double y = z;
  if (!noise.noiseless()) y += std::normal_distribution<double>(0.0, noise.sigma())(gen);
  return y <= threshold ? 1 : 0;
}

}  // namespace onebit
