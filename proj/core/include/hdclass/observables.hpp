#pragma once

#include <string>
#include <vector>

#include "hdclass/erm_solver.hpp"
#include "hdclass/losses.hpp"
#include "hdclass/mixture_model.hpp"

namespace hdclass {

/// Per-sample dual variables of a fitted classifier and the plug-in
/// estimates of the fixed-point scalars built from them.
struct EmpiricalObservables {
  std::string loss_name;
  double lambda = 0.0;
  int p = 0;
  /// c_i = -l'(margin_i)
  Vector c;
  /// r_i = margin_i - kappa_hat * c_i, the leave-one-out margin surrogate.
  Vector r;
  double kappa_hat = 0.0;
  double theta_hat = 0.0;
  double eta_hat = 0.0;
  double gamma_hat = 0.0;

  [[nodiscard]] int n() const { return static_cast<int>(c.size()); }
};

/// Needs one p x p Cholesky factorization and n quadratic forms.
EmpiricalObservables compute_observables(const Dataset& data, const ErmSolution& sol,
                                         const Loss& loss);

/// Error predicted by plugging the estimated scalars into the population
/// margin law of the model.
double stochastic_error_prediction(const EmpiricalObservables& obs, const MixtureModel& model,
                                   double lambda);

/// rho_ij = c_i^T c_j / (|c_i| |c_j|) over classifiers fitted on one dataset.
Matrix cross_correlation(const std::vector<EmpiricalObservables>& obs_list);

}  // namespace hdclass
