#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "hdclass/erm_solver.hpp"
#include "hdclass/errors.hpp"
#include "hdclass/observables.hpp"
#include "hdclass/theory.hpp"
#include "oracles.hpp"

using namespace hdclass;

namespace {

MixtureModel dense_isotropic(int p, double mu_norm2 = 2.0) {
  return MixtureModel::isotropic(Vector::Constant(p, std::sqrt(mu_norm2 / p)), 1.0);
}

std::vector<Loss> all_losses() {
  return {Loss::logistic(), Loss::square(), Loss::exponential(), Loss::square_root()};
}

}  // namespace

TEST_CASE("plug-in scalars agree with a direct computation") {
  constexpr int p = 20;
  constexpr int n = 80;
  std::mt19937_64 rng(5);
  const MixtureModel model =
      MixtureModel::from_covariance(oracle::random_vector(p, rng, 1.0), oracle::random_spd(p, rng));
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, n, 2);
  const Matrix xy = data.signed_features();
  for (const Loss& loss : all_losses()) {
    CAPTURE(loss.name());
    const double lambda = 0.2;
    const ErmSolution sol = solve_erm(data, loss, lambda);
    const EmpiricalObservables obs = compute_observables(data, sol, loss);

    Matrix hess = lambda * Matrix::Identity(p, p);
    for (int i = 0; i < n; ++i) hess += loss.d2(sol.margins[i]) / n * xy.col(i) * xy.col(i).transpose();
    const Matrix q = hess.inverse();
    double kappa = 0.0;
    Vector c(n);
    for (int i = 0; i < n; ++i) {
      const double lev = xy.col(i).dot(q * xy.col(i)) / n;
      kappa += lev / (1.0 - loss.d2(sol.margins[i]) * lev) / n;
      c[i] = -loss.d1(sol.margins[i]);
    }
    CHECK(obs.kappa_hat == doctest::Approx(kappa).epsilon(1e-10));
    CHECK((obs.c - c).norm() <= 1e-14 * std::max(1.0, c.norm()));
    const Vector r = sol.margins - kappa * c;
    CHECK((obs.r - r).norm() <= 1e-9 * r.norm());
    const double r_bar = r.mean();
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < n; ++i) {
      num += (c[i] - c.mean()) * (r[i] - r_bar);
      den += (r[i] - r_bar) * (r[i] - r_bar);
    }
    CHECK(obs.theta_hat == doctest::Approx(-num / den).epsilon(1e-9));
    CHECK(obs.eta_hat == doctest::Approx(c.mean()).epsilon(1e-14));
    CHECK(obs.gamma_hat == doctest::Approx(std::sqrt(double(p)) * c.norm() / n).epsilon(1e-14));
  }
}

TEST_CASE("square loss duals are one minus the margins") {
  const MixtureModel model = dense_isotropic(30);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 120, 4);
  const ErmSolution sol = solve_erm(data, Loss::square(), 0.0);
  const EmpiricalObservables obs = compute_observables(data, sol, Loss::square());
  CHECK((obs.c - (Vector::Ones(120) - sol.margins)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((obs.r - (sol.margins - obs.kappa_hat * obs.c)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("unregularized duals are orthogonal to the signed features") {
  const MixtureModel model = dense_isotropic(50);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 300, 8);
  for (const Loss& loss : all_losses()) {
    const EmpiricalObservables obs = compute_observables(data, solve_erm(data, loss, 0.0), loss);
    CHECK((data.signed_features() * obs.c).norm() / 300.0 <= 1e-9);
  }
}

TEST_CASE("unregularized duals split into a least-squares part and a zero-sum remainder") {
  const MixtureModel model = dense_isotropic(60);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 360, 3);
  const Vector c_ls =
      compute_observables(data, solve_erm(data, Loss::square(), 0.0), Loss::square()).c;
  for (const Loss& loss : {Loss::logistic(), Loss::exponential(), Loss::square_root()}) {
    CAPTURE(loss.name());
    const Vector c = compute_observables(data, solve_erm(data, loss, 0.0), loss).c;
    const double a = c.dot(c_ls) / c_ls.squaredNorm();
    const Vector rest = c - a * c_ls;
    CHECK(a >= 0.0);
    CHECK(std::abs(rest.sum()) <= 1e-6 * rest.norm() * std::sqrt(360.0));
    // The least-squares dual has the smallest norm-to-sum ratio.
    CHECK(c_ls.norm() / c_ls.sum() <= c.norm() / c.sum() + 1e-12);
  }
}

TEST_CASE("the unregularized ratio gamma/eta is bounded below") {
  constexpr int p = 50;
  constexpr int n = 200;
  const MixtureModel model = dense_isotropic(p, 0.5);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, n, 7);
  for (const Loss& loss : all_losses()) {
    const EmpiricalObservables obs = compute_observables(data, solve_erm(data, loss, 0.0), loss);
    CHECK(obs.gamma_hat / obs.eta_hat >= std::sqrt(double(p) / n) - 1e-12);
  }
}

TEST_CASE("isotropic unregularized prediction has a scalar form") {
  constexpr int p = 80;
  const double mu2 = 0.5;
  const MixtureModel model = dense_isotropic(p, mu2);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 400, 12);
  const EmpiricalObservables obs =
      compute_observables(data, solve_erm(data, Loss::logistic(), 0.0), Loss::logistic());
  const double ratio = obs.gamma_hat / obs.eta_hat;
  const double ref = oracle::upper_tail(mu2 / std::sqrt(mu2 + ratio * ratio));
  CHECK(stochastic_error_prediction(obs, model, 0.0) == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("stochastic prediction on the dense isotropic benchmark") {
  constexpr int p = 300;
  const MixtureModel model = dense_isotropic(p);
  SUBCASE("logistic, lambda = 1") {
    const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 3 * p, 1);
    const ErmSolution sol = solve_erm(data, Loss::logistic(), 1.0);
    const EmpiricalObservables obs = compute_observables(data, sol, Loss::logistic());
    const double pred = stochastic_error_prediction(obs, model, 1.0);
    CHECK(pred == doctest::Approx(0.0963).epsilon(0.003 / 0.0963));
    CHECK(std::abs(pred - classification_error(sol.beta, model)) < 0.005);
  }
  SUBCASE("square, plateau at large lambda") {
    const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 3 * p, 2);
    const ErmSolution sol = solve_erm(data, Loss::square(), 1024.0);
    const EmpiricalObservables obs = compute_observables(data, sol, Loss::square());
    CHECK(std::abs(stochastic_error_prediction(obs, model, 1024.0) - 0.0952) < 0.003);
  }
  SUBCASE("square, unregularized at n = 3p") {
    const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 3 * p, 3);
    const EmpiricalObservables obs =
        compute_observables(data, solve_erm(data, Loss::square(), 0.0), Loss::square());
    CHECK(std::abs(stochastic_error_prediction(obs, model, 0.0) - 0.1467) < 0.01);
  }
}

TEST_CASE("plug-in scalars approach the deterministic limit") {
  constexpr int p = 300;
  constexpr int n = 2700;
  const MixtureModel model = dense_isotropic(p);
  const Loss loss = Loss::logistic();
  const double lambda = 0.5;
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, n, 10);
  const EmpiricalObservables obs = compute_observables(data, solve_erm(data, loss, lambda), loss);
  const TheoryState st = solve_fixed_point(model, loss, lambda, n);
  CHECK(obs.theta_hat == doctest::Approx(st.theta).epsilon(0.05));
  CHECK(obs.eta_hat == doctest::Approx(st.eta).epsilon(0.05));
  CHECK(obs.gamma_hat == doctest::Approx(st.gamma).epsilon(0.05));
  CHECK(obs.kappa_hat == doctest::Approx(st.kappa).epsilon(0.05));
}

TEST_CASE("dual cross-correlation") {
  const MixtureModel model = dense_isotropic(100, 0.5);
  std::vector<double> sq_log;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 400, seed);
    const auto a = compute_observables(data, solve_erm(data, Loss::logistic(), 0.0), Loss::logistic());
    const auto b = compute_observables(data, solve_erm(data, Loss::square(), 0.0), Loss::square());
    const Matrix rho = cross_correlation({a, a, b});
    CHECK(rho(0, 1) == 1.0);
    CHECK(rho(0, 0) == 1.0);
    CHECK(rho(0, 2) > 0.0);
    CHECK(rho(0, 2) < 1.0);
    CHECK(rho(0, 2) == rho(2, 0));
    sq_log.push_back(rho(0, 2));
  }
  const auto [lo, hi] = std::minmax_element(sq_log.begin(), sq_log.end());
  CHECK(*hi - *lo < 0.05);

  EmpiricalObservables x;
  EmpiricalObservables y;
  x.c = Vector::Zero(4);
  y.c = Vector::Zero(4);
  x.c << 1, 1, 0, 0;
  y.c << 0, 0, 1, -1;
  CHECK(cross_correlation({x, y})(0, 1) == 0.0);
  y.c = Vector::Ones(3);
  CHECK_THROWS_AS(cross_correlation({x, y}), InvalidArgument);
}

TEST_CASE("degenerate leave-one-out margins are rejected") {
  const MixtureModel model = dense_isotropic(10);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 40, 1);
  ErmSolution sol = solve_erm(data, Loss::logistic(), 1.0);
  sol.beta.setZero();
  sol.margins.setZero();
  CHECK_THROWS_AS(compute_observables(data, sol, Loss::logistic()), NumericalFailure);
  sol.margins = Vector::Zero(3);
  CHECK_THROWS_AS(compute_observables(data, sol, Loss::logistic()), InvalidArgument);
}
