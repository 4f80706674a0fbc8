#include "hdclass/observables.hpp"

#include <cmath>
#include <string>

#include "hdclass/errors.hpp"
#include "hdclass/spectral.hpp"

namespace hdclass {

namespace {

constexpr double kMinLeverageDenominator = 1e-8;

}  // namespace

EmpiricalObservables compute_observables(const Dataset& data, const ErmSolution& sol,
                                         const Loss& loss) {
  const int n = data.n();
  const int p = data.p();
  if (sol.margins.size() != n || sol.beta.size() != p)
    throw InvalidArgument("observables: solution does not match the dataset");

  EmpiricalObservables obs;
  obs.loss_name = loss.name();
  obs.lambda = sol.lambda;
  obs.p = p;
  obs.c.resize(n);
  Vector d2(n);
  for (int i = 0; i < n; ++i) {
    obs.c[i] = -loss.d1(sol.margins[i]);
    d2[i] = loss.d2(sol.margins[i]);
  }

  const Matrix& x = data.features;
  Matrix hess = Matrix::Zero(p, p);
  const Matrix weighted = x * d2.cwiseSqrt().asDiagonal();
  hess.selfadjointView<Eigen::Lower>().rankUpdate(weighted, 1.0 / n);
  hess.diagonal().array() += sol.lambda;
  Eigen::LLT<Matrix> llt(hess);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("observables: loss Hessian is not positive definite");
  // x_i^T Q x_i = |L^{-1} x_i|^2 with Q^{-1} = L L^T.
  const Matrix half = llt.matrixL().solve(x);
  const Vector leverage = half.colwise().squaredNorm().transpose() / static_cast<double>(n);

  double kappa = 0.0;
  for (int i = 0; i < n; ++i) {
    const double denom = 1.0 - d2[i] * leverage[i];
    if (!(denom >= kMinLeverageDenominator))
      throw NumericalFailure("observables: leverage denominator " + std::to_string(denom) +
                             " at sample " + std::to_string(i) + " is too close to zero");
    kappa += leverage[i] / denom;
  }
  obs.kappa_hat = kappa / n;

  obs.r = sol.margins - obs.kappa_hat * obs.c;
  const Vector centered = obs.r.array() - obs.r.mean();
  const double var = centered.squaredNorm();
  if (!(var > 0.0)) throw NumericalFailure("observables: r has zero variance, theta undefined");
  obs.theta_hat = -obs.c.dot(centered) / var;
  obs.eta_hat = obs.c.sum() / n;
  obs.gamma_hat = std::sqrt(static_cast<double>(p)) * obs.c.norm() / n;
  return obs;
}

double stochastic_error_prediction(const EmpiricalObservables& obs, const MixtureModel& model,
                                   double lambda) {
  if (!(obs.theta_hat > 0.0))
    throw NumericalFailure("stochastic prediction: estimated theta is not positive");
  if (obs.p != model.dim()) throw InvalidArgument("stochastic prediction: dimension mismatch");
  return margin_law_error(margin_law(model, lambda, obs.theta_hat, obs.eta_hat, obs.gamma_hat));
}

Matrix cross_correlation(const std::vector<EmpiricalObservables>& obs_list) {
  const auto m = static_cast<Eigen::Index>(obs_list.size());
  if (m == 0) throw InvalidArgument("cross_correlation: empty list");
  const int n = obs_list.front().n();
  Matrix stacked(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (obs_list[j].n() != n) throw InvalidArgument("cross_correlation: mismatched sample counts");
    stacked.col(j) = obs_list[j].c;
  }
  const Matrix gram = stacked.transpose() * stacked;
  if (!(gram.diagonal().minCoeff() > 0.0))
    throw NumericalFailure("cross_correlation: zero dual vector");
  // Dividing by sqrt(g_ii g_jj) rather than normalizing first keeps identical
  // vectors at exactly 1.
  Matrix rho(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      rho(i, j) = gram(i, j) / std::sqrt(gram(i, i) * gram(j, j));
  return rho.cwiseMax(-1.0).cwiseMin(1.0);
}

}  // namespace hdclass
