#include <doctest.h>

#include <cmath>
#include <random>

#include "hdclass/erm_solver.hpp"
#include "hdclass/errors.hpp"
#include "hdclass/losses.hpp"
#include "hdclass/mixture_model.hpp"
#include "oracles.hpp"

using namespace hdclass;

namespace {

Dataset toeplitz_data(int p, int n, std::uint64_t seed, double mu_norm2 = 1.0) {
  Matrix cov(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) cov(i, j) = std::pow(0.3, std::abs(i - j));
  const MixtureModel model =
      MixtureModel::from_covariance(Vector::Constant(p, std::sqrt(mu_norm2 / p)), cov);
  return sample_dataset(model, NoiseLaw::gaussian, n, seed);
}

std::vector<Loss> all_losses() {
  return {Loss::logistic(), Loss::square(), Loss::exponential(), Loss::square_root()};
}

}  // namespace

TEST_CASE("square loss matches the ridge closed form") {
  const Dataset data = toeplitz_data(40, 120, 3);
  const Matrix xy = data.signed_features();
  for (double lambda : {0.01, 0.3, 2.0}) {
    const Matrix a = lambda * Matrix::Identity(40, 40) + xy * xy.transpose() / 120.0;
    const Vector b = xy.rowwise().sum() / 120.0;
    const Vector ref = a.ldlt().solve(b);
    const ErmSolution sol = solve_erm(data, Loss::square(), lambda);
    CHECK((sol.beta - ref).norm() <= 1e-8 * ref.norm());
  }
}

TEST_CASE("scalar ridge by hand") {
  Dataset data;
  data.features = Matrix::Constant(1, 1, 2.0);
  data.labels = Vector::Ones(1);
  // (1 + 4) beta = 2
  CHECK(solve_erm(data, Loss::square(), 1.0).beta[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(solve_least_squares(data, 1.0).beta[0] == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("least squares on an identity design") {
  Dataset data;
  data.features = Matrix::Identity(2, 2);
  data.labels = Vector::Ones(2);
  // (I/2) beta = (1, 1)/2
  const ErmSolution ls = solve_least_squares(data, 0.0);
  CHECK((ls.beta - Vector::Ones(2)).norm() < 1e-14);
}

TEST_CASE("least squares and square-loss ERM coincide") {
  const Dataset data = toeplitz_data(30, 90, 5);
  for (double lambda : {0.0, 0.5}) {
    const ErmSolution a = solve_least_squares(data, lambda);
    const ErmSolution b = solve_erm(data, Loss::square(), lambda);
    CHECK((a.beta - b.beta).norm() <= 1e-8 * a.beta.norm());
  }
}

TEST_CASE("logistic solution shrinks as lambda grows") {
  const Dataset data = toeplitz_data(50, 200, 9);
  double prev = INFINITY;
  for (double lambda : {1.0, 10.0, 100.0, 1000.0}) {
    const double norm = solve_erm(data, Loss::logistic(), lambda).beta.norm();
    CHECK(norm < prev);
    prev = norm;
  }
}

TEST_CASE("heavy regularization approaches the scaled mean direction") {
  const Dataset data = toeplitz_data(30, 100, 2);
  const double lambda = 1e6;
  for (const Loss& loss : all_losses()) {
    CAPTURE(loss.name());
    const Vector ref = -loss.d1(0.0) * data.signed_features().rowwise().sum() / (100.0 * lambda);
    const ErmSolution sol = solve_erm(data, loss, lambda);
    CHECK((sol.beta - ref).norm() <= 0.01 * ref.norm());
  }
}

TEST_CASE("LDA is a positive multiple of least squares") {
  const Dataset data = toeplitz_data(40, 160, 6);
  const MixtureModel model = MixtureModel::isotropic(Vector::Constant(40, std::sqrt(1.0 / 40)), 1.0);
  for (double lambda : {0.0, 0.2}) {
    const ErmSolution ls = solve_least_squares(data, lambda);
    const ErmSolution lda = solve_lda(data, lambda);
    const Vector mu_hat = data.signed_features().rowwise().mean();
    const double factor = 2.0 / (1.0 - mu_hat.dot(ls.beta));
    CHECK(factor > 0.0);
    CHECK((lda.beta - factor * ls.beta).norm() <= 1e-8 * lda.beta.norm());
    CHECK(std::abs(classification_error(lda.beta, model) - classification_error(ls.beta, model)) <=
          1e-12);
  }
}

TEST_CASE("LDA with a vanishing empirical mean returns zero") {
  Dataset data;
  data.features = Matrix(2, 4);
  data.features << 1, -1, 0.5, -0.5, 0.3, -0.3, -2, 2;
  data.labels = Vector::Ones(4);
  CHECK(solve_lda(data, 0.1).beta.norm() == 0.0);
}

TEST_CASE("fitted solutions are stationary and improve on zero") {
  const Dataset data = toeplitz_data(60, 360, 11);
  for (const Loss& loss : all_losses()) {
    for (double lambda : {0.0, 0.1, 1.0}) {
      CAPTURE(loss.name());
      CAPTURE(lambda);
      const ErmSolution sol = solve_erm(data, loss, lambda);
      const Vector grad = erm_gradient(data, loss, lambda, sol.beta);
      const double scale = std::max(1.0, (data.signed_features().rowwise().sum() / 360.0).norm());
      CHECK(grad.cwiseAbs().maxCoeff() <= 1e-9 * scale);
      CHECK(erm_objective(data, loss, lambda, sol.beta) <=
            erm_objective(data, loss, lambda, Vector::Zero(60)) + 1e-15);
      if (lambda > 0.0) CHECK(sol.beta.squaredNorm() <= 2.0 * loss.value(0.0) / lambda);
      CHECK((sol.margins - data.signed_features().transpose() * sol.beta).norm() <=
            1e-10 * std::max(1.0, sol.margins.norm()));
    }
  }
}

TEST_CASE("gradient agrees with finite differences of the objective") {
  const Dataset data = toeplitz_data(8, 30, 4);
  std::mt19937_64 rng(1);
  const Vector beta = oracle::random_vector(8, rng, 0.7);
  for (const Loss& loss : all_losses()) {
    const Vector grad = erm_gradient(data, loss, 0.3, beta);
    for (int j = 0; j < 8; ++j) {
      auto f = [&](double s) {
        Vector b = beta;
        b[j] += s;
        return erm_objective(data, loss, 0.3, b);
      };
      CHECK(std::abs(oracle::central_difference(f, 0.0) - grad[j]) < 1e-7);
    }
  }
}

TEST_CASE("warm start reaches the same solution") {
  const Dataset data = toeplitz_data(50, 250, 13);
  const ErmSolution cold = solve_erm(data, Loss::logistic(), 0.05);
  ErmOptions opts;
  opts.warm_start = solve_erm(data, Loss::logistic(), 0.1).beta;
  const ErmSolution warm = solve_erm(data, Loss::logistic(), 0.05, opts);
  CHECK((warm.beta - cold.beta).norm() <= 1e-8 * cold.beta.norm());
}

TEST_CASE("removing one sample changes its margin by the leverage correction") {
  constexpr int p = 150;
  constexpr int n = 600;
  const Dataset data = toeplitz_data(p, n, 17, 2.0);
  const Loss loss = Loss::logistic();
  const double lambda = 1.0;
  const ErmSolution full = solve_erm(data, loss, lambda);
  const Matrix xy = data.signed_features();
  Matrix hess = lambda * Matrix::Identity(p, p);
  for (int i = 0; i < n; ++i) hess += loss.d2(full.margins[i]) / n * xy.col(i) * xy.col(i).transpose();
  const Matrix hess_inv = hess.inverse();

  std::vector<double> dev;
  for (int i = 0; i < 10; ++i) {
    Dataset loo;
    loo.features.resize(p, n - 1);
    loo.labels.resize(n - 1);
    for (int j = 0, k = 0; j < n; ++j) {
      if (j == i) continue;
      loo.features.col(k) = data.features.col(j);
      loo.labels[k++] = data.labels[j];
    }
    // The reduced problem has weight 1/(n-1); rescale lambda so the objective
    // is proportional to the full one without sample i.
    const ErmSolution part = solve_erm(loo, loss, lambda * n / (n - 1.0));
    const double loo_margin = xy.col(i).dot(part.beta);
    const double c = -loss.d1(full.margins[i]);
    const double q = xy.col(i).dot(hess_inv * xy.col(i)) / n;
    const double k_i = q / (1.0 - loss.d2(full.margins[i]) * q);
    dev.push_back(std::abs(loo_margin - (full.margins[i] - k_i * c)));
  }
  std::sort(dev.begin(), dev.end());
  CHECK(dev[dev.size() / 2] <= 5.0 / std::sqrt(double(p)));
}

TEST_CASE("ill-posed and invalid problems are reported") {
  const Dataset wide = toeplitz_data(40, 30, 1);
  CHECK_THROWS_AS(solve_erm(wide, Loss::logistic(), 0.0), IllPosed);
  CHECK_THROWS_AS(solve_least_squares(wide, 0.0), IllPosed);
  CHECK_THROWS_AS(solve_erm(wide, Loss::logistic(), -1.0), InvalidArgument);

  // Linearly separable: every label agrees with the first coordinate.
  Dataset sep = toeplitz_data(3, 20, 2);
  for (int i = 0; i < 20; ++i) {
    sep.features(0, i) = 1.0 + std::abs(sep.features(0, i));
    sep.labels[i] = 1.0;
  }
  CHECK_THROWS_AS(solve_erm(sep, Loss::logistic(), 0.0), IllPosed);
  CHECK_THROWS_AS(solve_erm(sep, Loss::exponential(), 0.0), IllPosed);
  CHECK_NOTHROW(solve_erm(sep, Loss::square(), 0.0));
}
