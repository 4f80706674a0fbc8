#include "hdclass/mixture_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <string>

#include "hdclass/errors.hpp"
#include "hdclass/gaussian.hpp"

namespace hdclass {

namespace {

constexpr double kOrthonormalTol = 1e-10;

std::mt19937_64 make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffULL),
                    static_cast<std::uint32_t>(seed >> 32), 0x9e3779b9U};
  return std::mt19937_64(seq);
}

}  // namespace

MixtureModel::MixtureModel(Vector mu, Matrix eigvecs, Vector eigvals_sqrt)
    : mu_(std::move(mu)), eigvecs_(std::move(eigvecs)), eigvals_sqrt_(std::move(eigvals_sqrt)) {
  const auto p = mu_.size();
  if (p == 0) throw InvalidArgument("mixture model: empty mean vector");
  if (eigvecs_.rows() != p || eigvecs_.cols() != p || eigvals_sqrt_.size() != p)
    throw InvalidArgument("mixture model: dimension mismatch between mu, V and Lambda");
  if (!mu_.allFinite()) throw InvalidArgument("mixture model: non-finite mean");
  for (Eigen::Index d = 0; d < p; ++d) {
    if (!(eigvals_sqrt_[d] > 0.0) || !std::isfinite(eigvals_sqrt_[d]))
      throw InvalidArgument("mixture model: Lambda entries must be strictly positive");
  }
  const double ortho_err =
      (eigvecs_.transpose() * eigvecs_ - Matrix::Identity(p, p)).cwiseAbs().maxCoeff();
  if (ortho_err > kOrthonormalTol)
    throw InvalidArgument("mixture model: eigenvector matrix is not orthonormal (err " +
                          std::to_string(ortho_err) + ")");
  identity_basis_ = eigvecs_.isIdentity(0.0);
  cov_eigvals_ = eigvals_sqrt_.array().square();
  mu_weights_ = (eigvecs_.transpose() * mu_).array().square();
}

MixtureModel MixtureModel::from_covariance(Vector mu, const Matrix& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mu.size())
    throw InvalidArgument("mixture model: covariance must be p x p");
  const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(1.0, cov.cwiseAbs().maxCoeff()))
    throw InvalidArgument("mixture model: covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalFailure("mixture model: eigensolver failed");
  const Vector& vals = eig.eigenvalues();
  if (!(vals.minCoeff() > 0.0))
    throw InvalidArgument("mixture model: covariance is not positive definite");
  return MixtureModel(std::move(mu), eig.eigenvectors(), vals.cwiseSqrt());
}

MixtureModel MixtureModel::isotropic(Vector mu, double variance) {
  if (!(variance > 0.0)) throw InvalidArgument("mixture model: variance must be positive");
  const auto p = mu.size();
  return MixtureModel(std::move(mu), Matrix::Identity(p, p),
                      Vector::Constant(p, std::sqrt(variance)));
}

Matrix MixtureModel::covariance() const {
  return eigvecs_ * cov_eigvals_.asDiagonal() * eigvecs_.transpose();
}

Vector MixtureModel::apply_cov(const Vector& v) const {
  if (identity_basis_) return cov_eigvals_.cwiseProduct(v);
  return eigvecs_ * cov_eigvals_.cwiseProduct(eigvecs_.transpose() * v);
}

Vector MixtureModel::apply_shifted_inverse(double lambda, double scale, const Vector& v) const {
  const Vector denom = (scale * cov_eigvals_.array() + lambda).matrix();
  if (!(denom.minCoeff() > 0.0))
    throw NumericalFailure("mixture model: shifted covariance is not positive definite");
  if (identity_basis_) return v.cwiseQuotient(denom);
  return eigvecs_ * (eigvecs_.transpose() * v).cwiseQuotient(denom);
}

NoiseLaw parse_noise_law(std::string_view name) {
  if (name == "gaussian") return NoiseLaw::gaussian;
  if (name == "rademacher") return NoiseLaw::rademacher;
  if (name == "uniform" || name == "uniform_unit_variance") return NoiseLaw::uniform_unit_variance;
  throw InvalidArgument("unknown noise law '" + std::string(name) + "'");
}

std::string_view to_string(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::gaussian: return "gaussian";
    case NoiseLaw::rademacher: return "rademacher";
    case NoiseLaw::uniform_unit_variance: return "uniform";
  }
  return "gaussian";
}

namespace {

template <class Engine>
void fill_noise(NoiseLaw law, Engine& eng, double* out, Eigen::Index count) {
  switch (law) {
    case NoiseLaw::gaussian: {
      std::normal_distribution<double> dist(0.0, 1.0);
      for (Eigen::Index i = 0; i < count; ++i) out[i] = dist(eng);
      break;
    }
    case NoiseLaw::rademacher: {
      std::bernoulli_distribution coin(0.5);
      for (Eigen::Index i = 0; i < count; ++i) out[i] = coin(eng) ? 1.0 : -1.0;
      break;
    }
    case NoiseLaw::uniform_unit_variance: {
      const double half_width = std::sqrt(3.0);
      std::uniform_real_distribution<double> dist(-half_width, half_width);
      for (Eigen::Index i = 0; i < count; ++i) out[i] = dist(eng);
      break;
    }
  }
}

}  // namespace

Vector sample_noise(NoiseLaw law, int count, std::uint64_t seed) {
  auto eng = make_engine(seed);
  Vector z(count);
  fill_noise(law, eng, z.data(), count);
  return z;
}

Matrix Dataset::signed_features() const { return features * labels.asDiagonal(); }

Dataset sample_dataset(const MixtureModel& model, NoiseLaw law, int n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample_dataset: n must be >= 1");
  const int p = model.dim();
  auto eng = make_engine(seed);
  std::bernoulli_distribution coin(0.5);

  Dataset data;
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) data.labels[i] = coin(eng) ? 1.0 : -1.0;

  Matrix z(p, n);
  fill_noise(law, eng, z.data(), z.size());
  z.array().colwise() *= model.eigvals_sqrt().array();
  if (model.identity_basis()) {
    data.features = std::move(z);
  } else {
    data.features.noalias() = model.eigvecs() * z;
  }
  data.features.noalias() += model.mean() * data.labels.transpose();
  return data;
}

Vector oracle_direction(const MixtureModel& model) {
  return 2.0 * model.apply_shifted_inverse(0.0, 1.0, model.mean());
}

double classification_error(const Vector& beta, const MixtureModel& model) {
  if (beta.size() != model.dim())
    throw InvalidArgument("classification_error: dimension mismatch");
  const double norm = beta.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw InvalidArgument("classification_error: beta must be a nonzero finite vector");
  const Vector unit = beta / norm;
  const double signal = unit.dot(model.mean());
  const Vector coords = model.identity_basis() ? unit : Vector(model.eigvecs().transpose() * unit);
  const double spread = std::sqrt(coords.cwiseAbs2().dot(model.cov_eigvals()));
  return gaussian_q(signal / spread);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  out << "y";
  for (int d = 1; d <= data.p(); ++d) out << ",x" << d;
  out << '\n';
  char buf[32];
  for (int i = 0; i < data.n(); ++i) {
    out << (data.labels[i] > 0 ? "1" : "-1");
    for (int d = 0; d < data.p(); ++d) {
      std::snprintf(buf, sizeof buf, ",%.17g", data.features(d, i));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace hdclass
