#pragma once

#include <vector>

namespace hdclass {

/// Nodes and weights for integrals against exp(-x^2) on the real line.
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Computes an n-point rule from the eigenvalues of the Jacobi matrix, polished
/// by Newton steps on the orthonormal Hermite recurrence. Weights come from the
/// recurrence in log space, so tail weights underflow cleanly instead of
/// losing relative precision.
GaussHermiteRule gauss_hermite(int n);

/// Shared 127-point rule used for expectations over a normal law.
const GaussHermiteRule& default_gauss_hermite();

/// Shared rules of increasing size: level 0 is the 127-point rule and each
/// level roughly doubles the node count (255, 511, 1023).
const GaussHermiteRule& gauss_hermite_level(int level);
inline constexpr int kGaussHermiteLevels = 4;

/// E[f(m + s*Z)] for Z standard normal.
template <class F>
double normal_expectation(const GaussHermiteRule& rule, double m, double s, F&& f) {
  constexpr double inv_sqrt_pi = 0.56418958354775628695;
  constexpr double sqrt2 = 1.41421356237309504880;
  double acc = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k)
    acc += rule.weights[k] * f(m + s * sqrt2 * rule.nodes[k]);
  return acc * inv_sqrt_pi;
}

}  // namespace hdclass
