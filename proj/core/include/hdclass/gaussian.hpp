#pragma once

#include <cmath>
#include <numbers>

namespace hdclass {

/// Standard Gaussian upper tail Q(t) = P(Z > t).
inline double gaussian_q(double t) { return 0.5 * std::erfc(t / std::numbers::sqrt2); }

/// Standard Gaussian CDF.
inline double gaussian_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

inline double gaussian_pdf(double t) {
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace hdclass
