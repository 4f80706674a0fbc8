#pragma once

#include <array>
#include <optional>
#include <string>

#include "hdclass/losses.hpp"
#include "hdclass/mixture_model.hpp"

namespace hdclass {

/// Deterministic limit of a fitted classifier: beta behaves like
/// (lambda I + theta C)^{-1} (eta mu + gamma C^{1/2} u / sqrt(p)) and the
/// leave-one-out margins like r ~ N(m, sigma^2).
struct TheoryState {
  double theta = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double kappa = 0.0;
  double m = 0.0;
  double sigma = 0.0;
  double lambda = 0.0;
  int n = 0;
  int p = 0;
  std::string loss_name;
  bool converged = false;
  int iterations = 0;
  /// Largest relative change of (theta, eta, gamma) under one undamped map.
  double residual = 0.0;
  /// Gauss-Hermite level the state was verified with (see gauss_hermite_level).
  int quadrature_level = 0;
};

struct FixedPointOptions {
  double tol = 1e-8;
  int max_iter = 2000;
  double damping = 0.5;
  /// Starting (theta, eta, gamma). When empty the square-loss state is used
  /// if it exists, else (1, 1, sqrt(p/n)).
  std::optional<std::array<double, 3>> init;
  bool analytic_init = true;
};

/// Gaussian moments of the residual map at r ~ N(m, sigma^2).
struct ResidualMoments {
  double mean_h = 0.0;
  double mean_h2 = 0.0;
  /// Cov[h(r), r]
  double cov_hr = 0.0;
};

ResidualMoments residual_moments(const Loss& loss, double kappa, double m, double sigma,
                                 int quadrature_level = 0);

/// (1/n) tr C (theta C + lambda I)^{-1}
double leverage_kappa(const MixtureModel& model, double theta, double lambda, int n);

/// Solves the self-consistent system by damped Picard iteration. The damping
/// is halved whenever the residual grows for three sweeps in a row, and
/// safeguarded Newton steps take over once the iterate is close or Picard
/// has stalled.
///
/// Expectations use the 127-point Gauss-Hermite rule. A converged point is
/// re-checked with the next larger rule, and iteration continues on the
/// larger rule when the check fails; this matters when the margin spread is
/// wide compared with the scale on which the residual map bends.
TheoryState solve_fixed_point(const MixtureModel& model, const Loss& loss, double lambda, int n,
                              const FixedPointOptions& options = {});

/// Closed-form state for the square loss from scalar solves only.
TheoryState square_loss_state(const MixtureModel& model, double lambda, int n);

/// Relative mismatch between a state and one application of the map.
std::array<double, 3> fixed_point_residuals(const TheoryState& state, const MixtureModel& model,
                                            const Loss& loss);

/// Q(m / sigma)
double predicted_error(const TheoryState& state);

/// Directional bias lambda / theta.
double bias_ratio(const TheoryState& state);

/// Upper limit on m^2 / sigma^2 over all losses whose bias ratio equals omega.
/// Throws IllPosed when 1 - (1/n) tr[((omega I + C)^{-1} C)^2] <= 0.
double bias_fixed_exponent(const MixtureModel& model, int n, double omega);

/// Q(sqrt(bias_fixed_exponent)), the smallest error reachable at that bias.
double bias_fixed_lower_bound(const MixtureModel& model, int n, double omega);

struct BiasCalibration {
  bool attained = false;
  double lambda = 0.0;
  TheoryState state;
  /// Bias ratios reached at the ends of the search interval.
  double omega_low = 0.0;
  double omega_high = 0.0;
  std::string reason;
};

/// Finds lambda with lambda / theta(lambda) = target_omega by bisection on
/// log lambda over [1e-8, 1e8]; monotonicity is checked on a coarse grid.
BiasCalibration calibrate_lambda_for_bias(const MixtureModel& model, const Loss& loss, int n,
                                          double target_omega);

}  // namespace hdclass
