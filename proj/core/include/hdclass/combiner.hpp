#pragma once

#include <vector>

#include "hdclass/erm_solver.hpp"
#include "hdclass/mixture_model.hpp"
#include "hdclass/observables.hpp"

namespace hdclass {

/// Weights a_i for sum_i a_i beta_i and the margin law they induce.
///
/// With v = sum_i (a_i / theta_i) c_i the combination behaves like
/// (omega_bias I + C)^{-1} (tau mu + omega_amp C^{1/2} u / sqrt(p)).
struct CombinationResult {
  Vector weights;
  double tau = 0.0;
  double omega_amp = 0.0;
  double omega_bias = 0.0;
  double predicted_error = 0.0;
  Vector combined_beta;
};

/// Common bias lambda_i / theta_i of a set of classifiers: 0 if all are
/// unregularized, the mean ratio if all regularized ratios agree to within
/// 10% of each other. Mixed sets throw InvalidArgument.
double shared_bias(const std::vector<EmpiricalObservables>& obs_list);

/// |v| / 1^T v for the given weights, the quantity the optimal weights minimize.
double combination_objective(const std::vector<EmpiricalObservables>& obs_list,
                             const Vector& weights);

/// Closed-form minimizer: v is the projection of the all-ones vector onto
/// span{c_i}. Weights are normalized to sum |a_i| = 1.
CombinationResult optimal_combination(const std::vector<EmpiricalObservables>& obs_list,
                                      const std::vector<ErmSolution>& sols,
                                      const MixtureModel& model);

/// Throws InvalidArgument when 1^T v <= 0.
double predicted_combination_error(const std::vector<EmpiricalObservables>& obs_list,
                                   const Vector& weights, const MixtureModel& model,
                                   double omega_bias);

}  // namespace hdclass
