#include "hdclass/erm_solver.hpp"

#include <cmath>
#include <algorithm>
#include <string>

#include "hdclass/errors.hpp"

namespace hdclass {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxHalvings = 60;
constexpr double kFlatSlope = 1e-10;

// Direct solves only need X X^T invertible, which n = p allows; the iterative
// solver needs n > p for an unregularized minimizer to be unique.
void check_inputs(const Dataset& data, double lambda, bool direct = false) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidArgument("ERM: lambda must be a finite nonnegative number");
  if (data.n() < 1 || data.features.cols() != data.n())
    throw InvalidArgument("ERM: malformed dataset");
  if (lambda == 0.0 && (direct ? data.n() < data.p() : data.n() <= data.p()))
    throw IllPosed("ERM: lambda = 0 needs n > p, otherwise interpolating solutions are not unique");
}

double mean_loss(const Loss& loss, const Vector& margins) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < margins.size(); ++i) acc += loss.value(margins[i]);
  return acc / static_cast<double>(margins.size());
}

ErmSolution package(const Matrix& xy, Vector beta, double lambda, std::string name,
                    double grad_residual, int iterations) {
  ErmSolution sol;
  sol.margins = xy.transpose() * beta;
  sol.beta = std::move(beta);
  sol.lambda = lambda;
  sol.loss_name = std::move(name);
  sol.grad_residual = grad_residual;
  sol.iterations = iterations;
  return sol;
}

}  // namespace

double erm_objective(const Dataset& data, const Loss& loss, double lambda, const Vector& beta) {
  const Vector margins = data.signed_features().transpose() * beta;
  return mean_loss(loss, margins) + 0.5 * lambda * beta.squaredNorm();
}

Vector erm_gradient(const Dataset& data, const Loss& loss, double lambda, const Vector& beta) {
  const Matrix xy = data.signed_features();
  const Vector margins = xy.transpose() * beta;
  const Vector d1 = margins.unaryExpr([&](double t) { return loss.d1(t); });
  return xy * d1 / static_cast<double>(data.n()) + lambda * beta;
}

ErmSolution solve_erm(const Dataset& data, const Loss& loss, double lambda,
                      const ErmOptions& options) {
  check_inputs(data, lambda);
  const int p = data.p();
  const double n = data.n();
  const Matrix xy = data.signed_features();
  const double scale = std::max(1.0, (xy.rowwise().sum() / n).norm());
  const double target = options.tol * scale;
  const bool can_escape = lambda == 0.0 && !loss.has_finite_minimizer();

  Vector beta = Vector::Zero(p);
  if (options.warm_start) {
    if (options.warm_start->size() != p) throw InvalidArgument("ERM: warm start has wrong size");
    beta = *options.warm_start;
  }

  Vector margins = xy.transpose() * beta;
  double obj = mean_loss(loss, margins) + 0.5 * lambda * beta.squaredNorm();
  Vector d1(data.n());
  Vector d2(data.n());
  Vector grad(p);
  Matrix hess(p, p);
  Matrix weighted(p, data.n());
  bool polished = false;

  for (int iter = 0; iter <= options.max_iter; ++iter) {
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
      d1[i] = loss.d1(margins[i]);
      d2[i] = loss.d2(margins[i]);
    }
    grad.noalias() = xy * d1 / n;
    grad += lambda * beta;
    const double gnorm = grad.norm();
    if (!std::isfinite(gnorm)) throw NumericalFailure("ERM: non-finite gradient");
    if (can_escape && margins.minCoeff() > 0.0)
      throw IllPosed("ERM: training set is linearly separable, the unregularized " + loss.name() +
                     " problem has no minimizer");
    if (gnorm <= target && polished)
      return package(xy, std::move(beta), lambda, loss.name(), gnorm, iter);
    if (iter == options.max_iter) break;

    weighted = xy * d2.cwiseSqrt().asDiagonal();
    hess.setZero();
    hess.selfadjointView<Eigen::Lower>().rankUpdate(weighted, 1.0 / n);
    hess.diagonal().array() += lambda;
    Eigen::LLT<Matrix> llt(hess);
    Vector dir;
    if (llt.info() == Eigen::Success) {
      dir = -llt.solve(grad);
    }
    if (dir.size() == 0 || !dir.allFinite() || dir.dot(grad) >= 0.0) dir = -grad;

    // The first step below tolerance is the polishing Newton step; accept it
    // if it does not increase the objective.
    if (gnorm <= target) polished = true;

    const double slope = dir.dot(grad);
    Vector trial(p);
    Vector trial_margins;
    double trial_obj = 0.0;
    bool accepted = false;
    auto gradient_norm_at = [&](const Vector& b, const Vector& marg) {
      const Vector g1 = marg.unaryExpr([&](double t) { return loss.d1(t); });
      return (xy * g1 / n + lambda * b).norm();
    };
    // Once the predicted decrease is down at the rounding level of the
    // objective, Armijo can no longer tell good steps from bad ones. The full
    // Newton step is then judged by the gradient it leaves behind.
    if (-slope <= kFlatSlope * std::max(1.0, std::abs(obj))) {
      trial = beta + dir;
      trial_margins = xy.transpose() * trial;
      trial_obj = mean_loss(loss, trial_margins) + 0.5 * lambda * trial.squaredNorm();
      accepted = std::isfinite(trial_obj) && gradient_norm_at(trial, trial_margins) < gnorm;
    }
    double step = 1.0;
    for (int h = 0; !accepted && h < kMaxHalvings; ++h) {
      trial = beta + step * dir;
      trial_margins = xy.transpose() * trial;
      trial_obj = mean_loss(loss, trial_margins) + 0.5 * lambda * trial.squaredNorm();
      if (std::isfinite(trial_obj) && trial_obj <= obj + kArmijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Near the optimum the objective decrease drowns in rounding; a full
      // step that still shrinks the gradient is then the right move.
      trial = beta + dir;
      trial_margins = xy.transpose() * trial;
      trial_obj = mean_loss(loss, trial_margins) + 0.5 * lambda * trial.squaredNorm();
      accepted = std::isfinite(trial_obj) && gradient_norm_at(trial, trial_margins) < 0.5 * gnorm &&
                 trial_obj <= obj + 1e-12 * std::max(1.0, std::abs(obj));
    }
    if (!accepted) {
      if (polished || gnorm <= 10.0 * target)
        return package(xy, std::move(beta), lambda, loss.name(), gnorm, iter);
      if (can_escape)
        throw IllPosed("ERM: line search stalled on an unregularized " + loss.name() +
                       " problem, data are likely separable");
      throw NumericalFailure("ERM: line search failed with gradient norm " + std::to_string(gnorm));
    }
    beta.swap(trial);
    margins.swap(trial_margins);
    obj = trial_obj;
    if (lambda == 0.0 && beta.norm() > options.divergence_norm)
      throw IllPosed("ERM: unregularized solution diverges (|beta| > " +
                     std::to_string(options.divergence_norm) + ")");
  }
  if (can_escape)
    throw IllPosed("ERM: no convergence for unregularized " + loss.name() +
                   ", data are likely separable");
  throw NumericalFailure("ERM: Newton did not converge in " + std::to_string(options.max_iter) +
                         " iterations");
}

ErmSolution solve_least_squares(const Dataset& data, double lambda) {
  check_inputs(data, lambda, true);
  const double n = data.n();
  const Matrix xy = data.signed_features();
  Matrix gram = Matrix::Zero(data.p(), data.p());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(data.features, 1.0 / n);
  gram.diagonal().array() += lambda;
  const Vector rhs = xy.rowwise().sum() / n;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14)
    throw IllPosed("least squares: singular normal equations");
  Vector beta = llt.solve(rhs);
  Vector resid = gram.selfadjointView<Eigen::Lower>() * beta - rhs;
  return package(xy, std::move(beta), lambda, "square", resid.norm(), 0);
}

ErmSolution solve_lda(const Dataset& data, double lambda) {
  check_inputs(data, lambda, true);
  const double n = data.n();
  const Matrix xy = data.signed_features();
  const Vector mu_hat = xy.rowwise().sum() / n;
  Matrix cov = Matrix::Zero(data.p(), data.p());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(data.features, 1.0 / n);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(mu_hat, -1.0);
  cov.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success || llt.rcond() < 1e-14)
    throw IllPosed("LDA: singular sample covariance");
  Vector beta = 2.0 * llt.solve(mu_hat);
  Vector resid = cov.selfadjointView<Eigen::Lower>() * beta - 2.0 * mu_hat;
  return package(xy, std::move(beta), lambda, "lda", resid.norm(), 0);
}

}  // namespace hdclass
