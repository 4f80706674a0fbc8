#include "hdclass/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hdclass/combiner.hpp"
#include "hdclass/config.hpp"
#include "hdclass/erm_solver.hpp"
#include "hdclass/errors.hpp"
#include "hdclass/experiment.hpp"
#include "hdclass/observables.hpp"
#include "hdclass/quadrature.hpp"
#include "hdclass/theory.hpp"

namespace hdclass {

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome bound(double worst, double limit) {
  return {worst <= limit, "worst " + sci(worst) + " (limit " + sci(limit) + ")"};
}

std::vector<Loss> smooth_losses() {
  return {Loss::logistic(), Loss::exponential(), Loss::square_root(), Loss::square()};
}

Loss generic_square() {
  return Loss::custom(
      "square_generic", [](double t) { return 0.5 * (t - 1.0) * (t - 1.0); },
      [](double t) { return t - 1.0; }, [](double) { return 1.0; }, true);
}

Outcome prox_round_trip() {
  double worst = 0.0;
  for (const Loss& loss : smooth_losses())
    for (double kappa : {1e-3, 0.1, 1.0, 10.0, 1e3})
      for (int k = -40; k <= 40; ++k) {
        const double t = 0.5 * k;
        const double a = prox(loss, kappa, t);
        worst = std::max(worst, std::abs(a + kappa * loss.d1(a) - t) / std::max(1.0, std::abs(t)));
      }
  return bound(worst, 1e-10);
}

Dataset drop_sample(const Dataset& data, int i) {
  Dataset out;
  const int n = data.n();
  out.features.resize(data.p(), n - 1);
  out.labels.resize(n - 1);
  out.features.leftCols(i) = data.features.leftCols(i);
  out.features.rightCols(n - 1 - i) = data.features.rightCols(n - 1 - i);
  out.labels.head(i) = data.labels.head(i);
  out.labels.tail(n - 1 - i) = data.labels.tail(n - 1 - i);
  return out;
}

}  // namespace

bool run_selftest(std::ostream& out, int threads) {
  constexpr int p = 100;
  const MixtureModel model = build_model("ones:sqrt(1/p)", "toeplitz:0.3", p);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 6 * p, 11);
  const Matrix xy = data.signed_features();

  std::vector<std::pair<std::string, std::function<Outcome()>>> checks;

  checks.emplace_back("prox round trip", prox_round_trip);

  checks.emplace_back("stationarity residual", [&] {
    double worst = 0.0;
    for (const Loss& loss : smooth_losses())
      for (double lambda : {0.0, 0.5}) {
        const ErmSolution sol = solve_erm(data, loss, lambda);
        worst = std::max(worst, erm_gradient(data, loss, lambda, sol.beta).cwiseAbs().maxCoeff());
      }
    return bound(worst, 1e-9);
  });

  checks.emplace_back("LDA and least squares are proportional", [&] {
    double worst = 0.0;
    for (double lambda : {0.0, 0.1, 1.0}) {
      const Vector ls = solve_least_squares(data, lambda).beta.normalized();
      const Vector lda = solve_lda(data, lambda).beta.normalized();
      worst = std::max(worst, (ls - lda).cwiseAbs().maxCoeff());
    }
    return bound(worst, 1e-8);
  });

  checks.emplace_back("dual variables orthogonal to signed data at lambda = 0", [&] {
    double worst = 0.0;
    for (const Loss& loss : smooth_losses()) {
      const ErmSolution sol = solve_erm(data, loss, 0.0);
      const EmpiricalObservables obs = compute_observables(data, sol, loss);
      worst = std::max(worst, (xy * obs.c).cwiseAbs().maxCoeff() / data.n());
    }
    return bound(worst, 1e-9);
  });

  checks.emplace_back("least squares minimizes |c| / 1'c", [&] {
    auto ratio = [&](const Loss& loss) {
      const ErmSolution sol = solve_erm(data, loss, 0.0);
      const EmpiricalObservables obs = compute_observables(data, sol, loss);
      return obs.c.norm() / obs.c.sum();
    };
    const double ls = ratio(Loss::square());
    double worst = -HUGE_VAL;
    for (const Loss& loss : {Loss::logistic(), Loss::exponential(), Loss::square_root()})
      worst = std::max(worst, ls - ratio(loss));
    return bound(worst, 1e-9);
  });

  // Fixed-point states over losses, penalties and sample ratios.
  std::vector<TheoryState> states;
  for (const Loss& loss : smooth_losses())
    for (double lambda : {0.0, 0.1, 1.0})
      for (int ratio : {4, 8}) states.push_back(solve_fixed_point(model, loss, lambda, ratio * p));

  checks.emplace_back("theta^2 sigma^2 <= (n/p) gamma^2 - eta^2", [&] {
    double worst = -HUGE_VAL;
    for (const auto& s : states) {
      const double rhs = (static_cast<double>(s.n) / s.p * s.gamma * s.gamma - s.eta * s.eta);
      worst = std::max(worst, (s.theta * s.theta * s.sigma * s.sigma - rhs) / std::max(1.0, rhs));
    }
    return bound(worst, 1e-9);
  });

  checks.emplace_back("gamma / eta >= sqrt(p / n)", [&] {
    double worst = -HUGE_VAL;
    for (const auto& s : states)
      worst = std::max(worst, std::sqrt(static_cast<double>(s.p) / s.n) - s.gamma / s.eta);
    return bound(worst, 1e-9);
  });

  checks.emplace_back("square loss theta = 1 / (1 + kappa) through the generic solver", [&] {
    double worst = 0.0;
    FixedPointOptions opt;
    opt.analytic_init = false;
    opt.tol = 1e-12;
    for (double lambda : {0.0, 0.5, 2.0}) {
      const TheoryState s = solve_fixed_point(model, generic_square(), lambda, 4 * p, opt);
      worst = std::max(worst, std::abs(s.theta - 1.0 / (1.0 + s.kappa)));
    }
    return bound(worst, 1e-8);
  });

  checks.emplace_back("Gauss-Hermite moments against trapezoid at the fixed points", [&] {
    double worst = 0.0;
    std::size_t k = 0;
    for (const Loss& loss : smooth_losses())
      for (int rep = 0; rep < 6; ++rep, ++k) {
        const TheoryState& st = states[k];
        const ResidualMoments gh = residual_moments(loss, st.kappa, st.m, st.sigma, st.quadrature_level);
        // Trapezoid on +-12 standard deviations. The integrands are smooth
        // and decay like a Gaussian, so the rule converges geometrically.
        constexpr int steps = 40000;
        const double dx = 24.0 * st.sigma / steps;
        double mean_h = 0.0;
        double mean_h2 = 0.0;
        double cov_hr = 0.0;
        for (int j = 0; j <= steps; ++j) {
          const double dev = -12.0 * st.sigma + dx * j;
          const double z = dev / st.sigma;
          const double w = ((j == 0 || j == steps) ? 0.5 : 1.0) * std::exp(-0.5 * z * z);
          const double h = h_map(loss, st.kappa, st.m + dev);
          mean_h += w * h;
          mean_h2 += w * h * h;
          cov_hr += w * h * dev;
        }
        const double norm = dx / (st.sigma * std::sqrt(2.0 * std::numbers::pi));
        worst = std::max({worst, std::abs(gh.mean_h - norm * mean_h),
                          std::abs(gh.mean_h2 - norm * mean_h2), std::abs(gh.cov_hr - norm * cov_hr)});
      }
    return bound(worst, 1e-8);
  });

  checks.emplace_back("leave-one-out margins", [&] {
    constexpr int q = 150;
    const MixtureModel m2 = build_model("ones:sqrt(2/p)", "identity", q);
    const Dataset d2 = sample_dataset(m2, NoiseLaw::gaussian, 4 * q, 5);
    const Loss loss = Loss::logistic();
    const ErmSolution sol = solve_erm(d2, loss, 1.0);
    const EmpiricalObservables obs = compute_observables(d2, sol, loss);
    std::vector<double> dev;
    ErmOptions warm;
    warm.warm_start = sol.beta;
    for (int i = 0; i < d2.n(); i += d2.n() / 20) {
      const ErmSolution loo = solve_erm(drop_sample(d2, i), loss, 1.0, warm);
      const double r_true = d2.labels[i] * d2.features.col(i).dot(loo.beta);
      dev.push_back(std::abs(r_true - obs.r[i]));
    }
    std::sort(dev.begin(), dev.end());
    return bound(dev[dev.size() / 2], 5.0 / std::sqrt(static_cast<double>(q)));
  });

  checks.emplace_back("runner determinism and parallel-serial equivalence", [&] {
    ExperimentConfig c;
    c.p = 40;
    c.mean = "ones:sqrt(2/p)";
    c.losses = {"logistic", "square"};
    c.lambdas = {0.0, 0.5};
    c.n_values = {120, 200};
    c.reps = 4;
    c.combine = true;
    auto run = [&](int t) {
      c.threads = t;
      std::ostringstream s;
      run_experiment(c, &s);
      return s.str();
    };
    const std::string a = run(std::max(threads, 4));
    const std::string b = run(std::max(threads, 4));
    const std::string serial = run(1);
    const bool ok = a == b && a == serial;
    return Outcome{ok, ok ? std::to_string(a.size()) + " identical bytes" : "outputs differ"};
  });

  bool all = true;
  for (const auto& [name, check] : checks) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && o.pass;
    char t[32];
    std::snprintf(t, sizeof t, "%.2fs", secs);
    out << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << t << "]\n";
  }
  return all;
}

}  // namespace hdclass
