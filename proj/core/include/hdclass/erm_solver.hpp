#pragma once

#include <optional>
#include <string>

#include "hdclass/losses.hpp"
#include "hdclass/mixture_model.hpp"

namespace hdclass {

/// Fitted weight vector together with its training margins y_i x_i^T beta.
struct ErmSolution {
  Vector beta;
  double lambda = 0.0;
  std::string loss_name;
  /// Euclidean norm of the objective gradient at beta.
  double grad_residual = 0.0;
  Vector margins;
  int iterations = 0;
};

struct ErmOptions {
  /// Stop once |grad| <= tol * max(1, |X y / n|).
  double tol = 1e-9;
  int max_iter = 500;
  /// Unregularized fits whose norm exceeds this are declared divergent.
  double divergence_norm = 1e6;
  std::optional<Vector> warm_start;
};

/// (1/n) sum l(y_i x_i^T beta) + lambda/2 |beta|^2
double erm_objective(const Dataset& data, const Loss& loss, double lambda, const Vector& beta);

/// Gradient of erm_objective.
Vector erm_gradient(const Dataset& data, const Loss& loss, double lambda, const Vector& beta);

/// Damped Newton with Armijo backtracking.
///
/// With lambda = 0 it requires n > p and throws IllPosed when the data turn
/// out to be separable for a loss without a finite minimizer.
ErmSolution solve_erm(const Dataset& data, const Loss& loss, double lambda,
                      const ErmOptions& options = {});

/// Direct solve of (lambda I + X X^T / n) beta = X y / n.
ErmSolution solve_least_squares(const Dataset& data, double lambda);

/// 2 (lambda I + C_hat)^{-1} mu_hat with mu_hat = X y / n and
/// C_hat = X X^T / n - mu_hat mu_hat^T.
ErmSolution solve_lda(const Dataset& data, double lambda);

}  // namespace hdclass
