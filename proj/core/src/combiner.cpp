#include "hdclass/combiner.hpp"

#include <cmath>
#include <string>

#include "hdclass/errors.hpp"
#include "hdclass/spectral.hpp"

namespace hdclass {

namespace {

constexpr double kCollinearCond = 1e12;
constexpr double kJitterCond = 1e8;
constexpr double kBiasAgreement = 0.1;

void check_list(const std::vector<EmpiricalObservables>& obs_list, Eigen::Index m) {
  if (obs_list.empty()) throw InvalidArgument("combination: no classifiers");
  if (static_cast<Eigen::Index>(obs_list.size()) != m)
    throw InvalidArgument("combination: weight count does not match classifier count");
  const int n = obs_list.front().n();
  for (const auto& o : obs_list) {
    if (o.n() != n) throw InvalidArgument("combination: classifiers fitted on different datasets");
    if (!(o.theta_hat > 0.0)) throw NumericalFailure("combination: nonpositive estimated theta");
  }
}

Vector combined_dual(const std::vector<EmpiricalObservables>& obs_list, const Vector& weights) {
  Vector v = Vector::Zero(obs_list.front().n());
  for (std::size_t i = 0; i < obs_list.size(); ++i)
    v += (weights[static_cast<Eigen::Index>(i)] / obs_list[i].theta_hat) * obs_list[i].c;
  return v;
}

}  // namespace

double shared_bias(const std::vector<EmpiricalObservables>& obs_list) {
  if (obs_list.empty()) throw InvalidArgument("combination: no classifiers");
  std::size_t zero = 0;
  for (const auto& o : obs_list) zero += o.lambda == 0.0 ? 1 : 0;
  if (zero == obs_list.size()) return 0.0;
  if (zero != 0) throw InvalidArgument("combination: cannot mix regularized and unregularized classifiers");
  double lo = HUGE_VAL;
  double hi = 0.0;
  double sum = 0.0;
  for (const auto& o : obs_list) {
    if (!(o.theta_hat > 0.0)) throw NumericalFailure("combination: nonpositive estimated theta");
    const double w = o.lambda / o.theta_hat;
    lo = std::min(lo, w);
    hi = std::max(hi, w);
    sum += w;
  }
  if (hi - lo > kBiasAgreement * hi)
    throw InvalidArgument("combination: classifiers have different bias ratios lambda/theta (" +
                          std::to_string(lo) + " vs " + std::to_string(hi) + ")");
  return sum / static_cast<double>(obs_list.size());
}

double combination_objective(const std::vector<EmpiricalObservables>& obs_list,
                             const Vector& weights) {
  check_list(obs_list, weights.size());
  const Vector v = combined_dual(obs_list, weights);
  return v.norm() / v.sum();
}

CombinationResult optimal_combination(const std::vector<EmpiricalObservables>& obs_list,
                                      const std::vector<ErmSolution>& sols,
                                      const MixtureModel& model) {
  const auto m = static_cast<Eigen::Index>(obs_list.size());
  check_list(obs_list, m);
  if (static_cast<Eigen::Index>(sols.size()) != m)
    throw InvalidArgument("combination: solutions and observables differ in count");

  CombinationResult res;
  res.omega_bias = shared_bias(obs_list);

  const int n = obs_list.front().n();
  Matrix duals(n, m);
  for (Eigen::Index i = 0; i < m; ++i) duals.col(i) = obs_list[i].c;
  Matrix gram = duals.transpose() * duals;
  const Vector rhs = duals.colwise().sum().transpose();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  const double ev_max = eig.eigenvalues().maxCoeff();
  const double ev_min = eig.eigenvalues().minCoeff();
  const double cond = ev_min > 0.0 ? ev_max / ev_min : HUGE_VAL;
  if (cond > kCollinearCond)
    throw IllPosed("combination: dual vectors are collinear (Gram condition number " +
                   std::to_string(cond) + ")");
  if (cond > kJitterCond) gram.diagonal().array() += 1e-12 * gram.trace() / m;
  const Vector b = gram.ldlt().solve(rhs);

  res.weights.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) res.weights[i] = obs_list[i].theta_hat * b[i];
  const double scale = res.weights.cwiseAbs().sum();
  if (!(scale > 0.0)) throw NumericalFailure("combination: all weights vanish");
  res.weights /= scale;

  const Vector v = combined_dual(obs_list, res.weights);
  res.tau = v.sum() / n;
  res.omega_amp = std::sqrt(static_cast<double>(model.dim())) * v.norm() / n;
  res.predicted_error =
      margin_law_error(margin_law(model, res.omega_bias, 1.0, res.tau, res.omega_amp));
  res.combined_beta = Vector::Zero(model.dim());
  for (Eigen::Index i = 0; i < m; ++i) res.combined_beta += res.weights[i] * sols[i].beta;
  return res;
}

double predicted_combination_error(const std::vector<EmpiricalObservables>& obs_list,
                                   const Vector& weights, const MixtureModel& model,
                                   double omega_bias) {
  check_list(obs_list, weights.size());
  if (!(omega_bias >= 0.0)) throw InvalidArgument("combination: bias must be nonnegative");
  const Vector v = combined_dual(obs_list, weights);
  const int n = obs_list.front().n();
  const double tau = v.sum() / n;
  if (!(tau > 0.0)) throw InvalidArgument("combination: infeasible weights, 1^T v <= 0");
  const double amp = std::sqrt(static_cast<double>(model.dim())) * v.norm() / n;
  return margin_law_error(margin_law(model, omega_bias, 1.0, tau, amp));
}

}  // namespace hdclass
