#include "hdclass/quadrature.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "hdclass/errors.hpp"

namespace hdclass {

namespace {

// Evaluates the orthonormal Hermite polynomials of degree n and n-1 at x.
// The pair is returned divided by exp(log_scale) because for large rules the
// outer roots sit where the polynomials overflow a double. The derivative
// follows from H'_n = sqrt(2n) H_{n-1}.
void hermite_pair(int n, double x, double& pn, double& pn_minus_1, double& log_scale) {
  constexpr double kRescale = 1e150;
  double p1 = std::pow(std::numbers::pi, -0.25);
  double p2 = 0.0;
  log_scale = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = x * std::sqrt(2.0 / j) * p2 - std::sqrt(static_cast<double>(j - 1) / j) * p3;
    if (std::abs(p1) > kRescale) {
      p1 /= kRescale;
      p2 /= kRescale;
      log_scale += std::log(kRescale);
    }
  }
  pn = p1;
  pn_minus_1 = p2;
}

}  // namespace

GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw InvalidArgument("gauss_hermite: need at least one node");
  // Roots from the symmetric tridiagonal Jacobi matrix (Golub-Welsch), then
  // polished by Newton on the recurrence. The weights come from the
  // recurrence too, which keeps tiny tail weights accurate to full relative
  // precision where eigenvector components would not.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 1));
  for (int j = 1; j < n; ++j) sub[j - 1] = std::sqrt(0.5 * j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
  eig.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalFailure("gauss_hermite: eigenvalue solve failed");

  GaussHermiteRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Descending order: node i is the (i+1)-th largest root.
    double z = eig.eigenvalues()[n - 1 - i];
    double pn = 0.0;
    double pm = 0.0;
    double log_scale = 0.0;
    for (int it = 0; it < 4; ++it) {
      hermite_pair(n, z, pn, pm, log_scale);
      const double step = pn / (std::sqrt(2.0 * n) * pm);
      z -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    hermite_pair(n, z, pn, pm, log_scale);
    const double deriv = std::sqrt(2.0 * n) * pm;
    // 2 / H'_n(z)^2, underflowing gracefully for the outermost nodes
    const double w = std::exp(std::log(2.0) - 2.0 * (std::log(std::abs(deriv)) + log_scale));
    rule.nodes[i] = z;
    rule.weights[i] = w;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[half - 1] = 0.0;
  return rule;
}

const GaussHermiteRule& default_gauss_hermite() { return gauss_hermite_level(0); }

const GaussHermiteRule& gauss_hermite_level(int level) {
  // Built on first use; the larger rules are rarely needed.
  switch (level) {
    case 0: {
      static const GaussHermiteRule rule = gauss_hermite(127);
      return rule;
    }
    case 1: {
      static const GaussHermiteRule rule = gauss_hermite(255);
      return rule;
    }
    case 2: {
      static const GaussHermiteRule rule = gauss_hermite(511);
      return rule;
    }
    case 3: {
      static const GaussHermiteRule rule = gauss_hermite(1023);
      return rule;
    }
    default:
      throw InvalidArgument("gauss_hermite_level: level out of range");
  }
}

}  // namespace hdclass
