#include "hdclass/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdclass/errors.hpp"
#include "hdclass/gaussian.hpp"
#include "hdclass/quadrature.hpp"
#include "hdclass/spectral.hpp"

namespace hdclass {

namespace {

// Newton is tried once Picard has run this many sweeps or the residual is
// below kNewtonBelow, and is paused for kNewtonPause sweeps after a rejection.
constexpr int kNewtonAfter = 20;
constexpr double kNewtonBelow = 1e-2;
constexpr int kNewtonPause = 10;
constexpr double kNewtonGain = 0.5;
// Unregularized losses without a finite minimizer: theta collapsing by this
// factor from its start means the map has no fixed point.
constexpr double kDriftRatio = 1e-2;

void check_problem(const MixtureModel& model, double lambda, int n) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidArgument("theory: lambda must be finite and nonnegative");
  if (n < 1) throw InvalidArgument("theory: n must be positive");
  if (!(model.mean().squaredNorm() > 0.0))
    throw InvalidArgument("theory: the class mean must be nonzero");
  if (lambda == 0.0 && n <= model.dim())
    throw IllPosed("theory: lambda = 0 requires n > p");
}

double relative_change(double next, double prev) {
  return std::abs(next - prev) / std::max(std::abs(prev), 1e-300);
}

// One application of the self-consistent map at (theta, eta, gamma). Also
// fills kappa, m and sigma of the input point into `state`.
std::array<double, 3> apply_map(const MixtureModel& model, const Loss& loss, double lambda, int n,
                                double theta, double eta, double gamma, int level,
                                TheoryState& state) {
  state.theta = theta;
  state.eta = eta;
  state.gamma = gamma;
  state.kappa = leverage_kappa(model, theta, lambda, n);
  const MarginLaw law = margin_law(model, lambda, theta, eta, gamma);
  state.m = law.mean;
  state.sigma = law.spread;
  const ResidualMoments mom = residual_moments(loss, state.kappa, law.mean, law.spread, level);
  const double var = law.spread * law.spread;
  return {-mom.cov_hr / var, mom.mean_h,
          std::sqrt(static_cast<double>(model.dim()) * mom.mean_h2 / n)};
}

}  // namespace

ResidualMoments residual_moments(const Loss& loss, double kappa, double m, double sigma,
                                 int quadrature_level) {
  const auto& rule = gauss_hermite_level(quadrature_level);
  constexpr double inv_sqrt_pi = 0.56418958354775628695;
  const double scale = sigma * std::numbers::sqrt2;
  ResidualMoments mom;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double dev = scale * rule.nodes[k];
    const double h = h_map(loss, kappa, m + dev);
    const double w = rule.weights[k];
    mom.mean_h += w * h;
    mom.mean_h2 += w * h * h;
    mom.cov_hr += w * h * dev;
  }
  mom.mean_h *= inv_sqrt_pi;
  mom.mean_h2 *= inv_sqrt_pi;
  mom.cov_hr *= inv_sqrt_pi;
  return mom;
}

double leverage_kappa(const MixtureModel& model, double theta, double lambda, int n) {
  const Vector& ev = model.cov_eigvals();
  double acc = 0.0;
  for (Eigen::Index d = 0; d < ev.size(); ++d) acc += ev[d] / (theta * ev[d] + lambda);
  return acc / n;
}

TheoryState square_loss_state(const MixtureModel& model, double lambda, int n) {
  check_problem(model, lambda, n);
  const int p = model.dim();
  TheoryState st;
  st.lambda = lambda;
  st.n = n;
  st.p = p;
  st.loss_name = "square";

  // theta (1 + kappa(theta)) = 1, increasing in theta on (0, 1].
  double theta = 0.0;
  if (lambda == 0.0) {
    theta = 1.0 - static_cast<double>(p) / n;
  } else {
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid * (1.0 + leverage_kappa(model, mid, lambda, n)) < 1.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    theta = 0.5 * (lo + hi);
  }
  const double kappa = leverage_kappa(model, theta, lambda, n);

  const Vector& ev = model.cov_eigvals();
  const Vector& w = model.mean_eigen_weights();
  double a = 0.0;
  double b = 0.0;
  double t = 0.0;
  for (Eigen::Index d = 0; d < ev.size(); ++d) {
    const double denom = lambda + theta * ev[d];
    a += w[d] / denom;
    b += w[d] * ev[d] / (denom * denom);
    t += (ev[d] / denom) * (ev[d] / denom);
  }
  const double eta = 1.0 / (1.0 + kappa + a);
  const double m = eta * a;
  const double k1 = (1.0 + kappa) * (1.0 + kappa);
  const double bracket = 1.0 - t / (n * k1);
  if (!(bracket > 0.0)) throw NumericalFailure("square-loss state: fluctuation equation has no root");
  const double gamma2 = (static_cast<double>(p) / n) * ((1.0 - m) * (1.0 - m) + eta * eta * b) /
                        (k1 * bracket);

  st.theta = theta;
  st.eta = eta;
  st.gamma = std::sqrt(gamma2);
  st.kappa = kappa;
  st.m = m;
  st.sigma = std::sqrt(eta * eta * b + gamma2 * t / p);
  st.converged = true;
  return st;
}

TheoryState solve_fixed_point(const MixtureModel& model, const Loss& loss, double lambda, int n,
                              const FixedPointOptions& options) {
  check_problem(model, lambda, n);
  const int p = model.dim();
  std::array<double, 3> x{1.0, 1.0, std::sqrt(static_cast<double>(p) / n)};
  if (options.init) {
    x = *options.init;
  } else if (options.analytic_init) {
    try {
      const TheoryState sq = square_loss_state(model, lambda, n);
      x = {sq.theta, sq.eta, sq.gamma};
    } catch (const std::exception&) {
      // keep the generic start
    }
  }
  if (!(x[0] > 0.0 && x[2] > 0.0)) throw InvalidArgument("theory: initial theta and gamma must be positive");

  TheoryState st;
  st.lambda = lambda;
  st.n = n;
  st.p = p;
  st.loss_name = loss.name();
  double damping = options.damping;
  double prev_res = HUGE_VAL;
  int growth = 0;
  const bool unbounded = lambda == 0.0 && !loss.has_finite_minimizer();

  int level = 0;
  auto change = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
    return std::max({relative_change(a[0], b[0]), relative_change(a[1], b[1]),
                     relative_change(a[2], b[2])});
  };
  auto admissible = [](const std::array<double, 3>& v) {
    return std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]) && v[0] > 0.0 &&
           v[2] > 0.0;
  };
  const double theta_start = x[0];
  int newton_pause = 0;

  for (int it = 0; it < options.max_iter; ++it) {
    const auto next = apply_map(model, loss, lambda, n, x[0], x[1], x[2], level, st);
    if (!admissible(next) || st.kappa > 1e12) {
      if (unbounded)
        throw IllPosed("theory: no bounded unregularized " + loss.name() +
                       " solution (the training set is asymptotically separable)");
      throw NumericalFailure("theory: fixed-point map left the admissible region at sweep " +
                             std::to_string(it));
    }
    const double res = change(next, x);
    st.iterations = it + 1;
    st.residual = res;
    st.quadrature_level = level;
    if (res <= options.tol) {
      if (level + 1 >= kGaussHermiteLevels) {
        st.converged = true;
        return st;
      }
      TheoryState check;
      const auto finer = apply_map(model, loss, lambda, n, x[0], x[1], x[2], level + 1, check);
      if (change(finer, x) <= options.tol) {
        st.converged = true;
        return st;
      }
      ++level;
      prev_res = HUGE_VAL;
      growth = 0;
      continue;
    }
    if (unbounded && x[0] < kDriftRatio * theta_start)
      throw IllPosed("theory: unregularized " + loss.name() +
                     " iteration drifts to theta = 0 (the training set is asymptotically separable)");

    // Picard contracts slowly when theta is small. Once it has settled into
    // the basin, Newton on x - G(x) with a forward-difference Jacobian takes
    // over, and each step is kept only if it shrinks the residual.
    if (newton_pause > 0) {
      --newton_pause;
    } else if (it >= kNewtonAfter || res < kNewtonBelow) {
      Eigen::Matrix3d jac;
      bool ok = true;
      for (int j = 0; j < 3 && ok; ++j) {
        std::array<double, 3> xp = x;
        const double step = 1e-7 * std::max(std::abs(x[j]), 1e-12);
        xp[j] += step;
        TheoryState scratch;
        const auto gp = apply_map(model, loss, lambda, n, xp[0], xp[1], xp[2], level, scratch);
        ok = admissible(gp);
        for (int i = 0; i < 3; ++i) jac(i, j) = (gp[i] - next[i]) / step - (i == j ? 1.0 : 0.0);
      }
      if (ok) {
        const Eigen::Vector3d f(next[0] - x[0], next[1] - x[1], next[2] - x[2]);
        const Eigen::Vector3d dx = jac.fullPivLu().solve(-f);
        std::array<double, 3> trial = x;
        double shrink = 1.0;
        // Stay inside theta, gamma > 0.
        for (int j : {0, 2})
          if (x[j] + dx[j] <= 0.0) shrink = std::min(shrink, 0.5 * x[j] / -dx[j]);
        for (int j = 0; j < 3; ++j) trial[j] = x[j] + shrink * dx[j];
        TheoryState scratch;
        const auto gt = apply_map(model, loss, lambda, n, trial[0], trial[1], trial[2], level, scratch);
        if (dx.allFinite() && admissible(gt) && scratch.kappa <= 1e12 &&
            change(gt, trial) < kNewtonGain * res) {
          x = trial;
          prev_res = HUGE_VAL;
          growth = 0;
          continue;
        }
      }
      newton_pause = kNewtonPause;
    }

    if (res > prev_res) {
      if (++growth >= 3) {
        damping = std::max(damping * 0.5, 1.0 / 64.0);
        growth = 0;
      }
    } else {
      growth = 0;
    }
    prev_res = res;
    for (int j = 0; j < 3; ++j) x[j] = (1.0 - damping) * x[j] + damping * next[j];
  }
  if (unbounded && st.theta < 1e-6)
    throw IllPosed("theory: unregularized " + loss.name() + " iteration drifts to theta = 0");
  throw NumericalFailure("theory: no convergence after " + std::to_string(options.max_iter) +
                         " sweeps, last residual " + std::to_string(st.residual) + " (theta " +
                         std::to_string(st.theta) + ", eta " + std::to_string(st.eta) +
                         ", gamma " + std::to_string(st.gamma) + ")");
}

std::array<double, 3> fixed_point_residuals(const TheoryState& state, const MixtureModel& model,
                                            const Loss& loss) {
  TheoryState scratch = state;
  const auto next = apply_map(model, loss, state.lambda, state.n, state.theta, state.eta,
                              state.gamma, state.quadrature_level, scratch);
  return {relative_change(next[0], state.theta), relative_change(next[1], state.eta),
          relative_change(next[2], state.gamma)};
}

double predicted_error(const TheoryState& state) {
  if (!(state.sigma > 0.0)) throw NumericalFailure("predicted_error: zero spread");
  return gaussian_q(state.m / state.sigma);
}

double bias_ratio(const TheoryState& state) { return state.lambda / state.theta; }

double bias_fixed_exponent(const MixtureModel& model, int n, double omega) {
  if (!(omega >= 0.0)) throw InvalidArgument("bias bound: omega must be nonnegative");
  const Vector& ev = model.cov_eigvals();
  const Vector& w = model.mean_eigen_weights();
  double a = 0.0;
  double b = 0.0;
  double t = 0.0;
  for (Eigen::Index d = 0; d < ev.size(); ++d) {
    const double denom = omega + ev[d];
    a += w[d] / denom;
    b += w[d] * ev[d] / (denom * denom);
    t += (ev[d] / denom) * (ev[d] / denom);
  }
  const double bracket = 1.0 - t / n;
  if (!(bracket > 0.0))
    throw IllPosed("bias bound: 1 - tr[((omega I + C)^{-1} C)^2] / n <= 0, bound is vacuous");
  return bracket * a * a / (b + t / n);
}

double bias_fixed_lower_bound(const MixtureModel& model, int n, double omega) {
  return gaussian_q(std::sqrt(bias_fixed_exponent(model, n, omega)));
}

BiasCalibration calibrate_lambda_for_bias(const MixtureModel& model, const Loss& loss, int n,
                                          double target_omega) {
  if (!(target_omega >= 0.0) || !std::isfinite(target_omega))
    throw InvalidArgument("calibration: target bias must be finite and nonnegative");
  BiasCalibration out;

  if (target_omega == 0.0) {
    if (n <= model.dim()) {
      out.reason = "zero bias needs lambda = 0, which requires n > p";
      return out;
    }
    try {
      out.state = solve_fixed_point(model, loss, 0.0, n);
      out.attained = true;
      out.lambda = 0.0;
    } catch (const IllPosed& e) {
      out.reason = e.what();
    }
    return out;
  }

  constexpr double log_lo = -8.0;
  constexpr double log_hi = 8.0;
  constexpr int grid = 17;
  std::vector<double> log_lambda(grid);
  std::vector<double> omega(grid);
  std::vector<TheoryState> states(grid);
  FixedPointOptions opts;
  try {
    for (int k = 0; k < grid; ++k) {
      log_lambda[k] = log_lo + (log_hi - log_lo) * k / (grid - 1);
      if (k > 0) opts.init = std::array<double, 3>{states[k - 1].theta, states[k - 1].eta, states[k - 1].gamma};
      states[k] = solve_fixed_point(model, loss, std::pow(10.0, log_lambda[k]), n, opts);
      omega[k] = bias_ratio(states[k]);
    }
  } catch (const std::runtime_error& e) {
    out.reason = std::string("fixed point failed on the search grid: ") + e.what();
    return out;
  }
  out.omega_low = omega.front();
  out.omega_high = omega.back();
  for (int k = 1; k < grid; ++k) {
    if (!(omega[k] > omega[k - 1])) {
      out.reason = "lambda/theta is not monotone on the search grid";
      return out;
    }
  }
  if (target_omega < out.omega_low || target_omega > out.omega_high) {
    out.reason = "target bias outside the attainable range";
    return out;
  }
  int k = 0;
  while (k + 1 < grid && omega[k + 1] < target_omega) ++k;
  double lo = log_lambda[k];
  double hi = log_lambda[k + 1];
  TheoryState best = states[k];
  const double tol = 1e-6 * std::max(1.0, target_omega);
  if (std::abs(omega[k] - target_omega) <= tol) {
    out.attained = true;
    out.lambda = std::pow(10.0, lo);
    out.state = states[k];
    return out;
  }
  // Tight enough that omega is resolved far below the target tolerance, but
  // above the ~1e-11 rounding floor of the map at large lambda.
  opts.tol = 1e-10;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    opts.init = std::array<double, 3>{best.theta, best.eta, best.gamma};
    TheoryState st;
    try {
      st = solve_fixed_point(model, loss, std::pow(10.0, mid), n, opts);
    } catch (const std::runtime_error& e) {
      out.reason = std::string("fixed point failed during bisection: ") + e.what();
      return out;
    }
    const double w = bias_ratio(st);
    best = st;
    if (std::abs(w - target_omega) <= tol) {
      out.attained = true;
      out.lambda = st.lambda;
      out.state = st;
      return out;
    }
    if (w < target_omega) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-15) break;
  }
  out.reason = "bisection did not reach the requested tolerance";
  return out;
}

}  // namespace hdclass
