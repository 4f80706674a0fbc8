#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

#include <Eigen/Dense>

namespace hdclass {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Two-class mixture x = y*mu + V*Lambda*z with C = V*Lambda^2*V^T.
///
/// The covariance is held in spectral form so that trace functionals of C
/// reduce to sums over eigenvalues and sampling needs no extra factorization.
/// Immutable after construction.
class MixtureModel {
 public:
  /// Takes the spectral factors directly. `eigvecs` must be orthonormal to
  /// 1e-10 and every entry of `eigvals_sqrt` strictly positive.
  MixtureModel(Vector mu, Matrix eigvecs, Vector eigvals_sqrt);

  /// Eigendecomposes a symmetric positive definite covariance once.
  static MixtureModel from_covariance(Vector mu, const Matrix& cov);

  /// C = variance * I; stores V = I and skips the basis change when sampling.
  static MixtureModel isotropic(Vector mu, double variance);

  [[nodiscard]] int dim() const { return static_cast<int>(mu_.size()); }
  [[nodiscard]] const Vector& mean() const { return mu_; }
  [[nodiscard]] const Matrix& eigvecs() const { return eigvecs_; }
  [[nodiscard]] const Vector& eigvals_sqrt() const { return eigvals_sqrt_; }
  /// Eigenvalues of C (the squares of eigvals_sqrt).
  [[nodiscard]] const Vector& cov_eigvals() const { return cov_eigvals_; }
  /// Squared coordinates of mu in the eigenbasis, (v_d^T mu)^2.
  [[nodiscard]] const Vector& mean_eigen_weights() const { return mu_weights_; }
  [[nodiscard]] bool identity_basis() const { return identity_basis_; }

  /// Dense C = V Lambda^2 V^T.
  [[nodiscard]] Matrix covariance() const;
  /// C * v computed through the spectral factors.
  [[nodiscard]] Vector apply_cov(const Vector& v) const;
  /// (lambda I + scale*C)^{-1} v computed through the spectral factors.
  [[nodiscard]] Vector apply_shifted_inverse(double lambda, double scale, const Vector& v) const;

 private:
  Vector mu_;
  Matrix eigvecs_;
  Vector eigvals_sqrt_;
  Vector cov_eigvals_;
  Vector mu_weights_;
  bool identity_basis_ = false;
};

enum class NoiseLaw { gaussian, rademacher, uniform_unit_variance };

NoiseLaw parse_noise_law(std::string_view name);
std::string_view to_string(NoiseLaw law);

/// Training set with samples stored as columns of a p x n matrix.
struct Dataset {
  Matrix features;
  Vector labels;

  [[nodiscard]] int n() const { return static_cast<int>(labels.size()); }
  [[nodiscard]] int p() const { return static_cast<int>(features.rows()); }
  /// Columns multiplied by their labels, X_y = [y_1 x_1, ..., y_n x_n].
  [[nodiscard]] Matrix signed_features() const;
};

/// Draws n i.i.d. samples; the label of each sample is a fair coin.
/// Deterministic for a given seed.
Dataset sample_dataset(const MixtureModel& model, NoiseLaw law, int n, std::uint64_t seed);

/// Draws `count` i.i.d. zero-mean unit-variance variates of the given law.
Vector sample_noise(NoiseLaw law, int count, std::uint64_t seed);

/// beta_* = 2 C^{-1} mu.
Vector oracle_direction(const MixtureModel& model);

/// Population misclassification rate Q(beta^T mu / sqrt(beta^T C beta)).
/// Throws InvalidArgument for the zero vector.
double classification_error(const Vector& beta, const MixtureModel& model);

/// Writes `y,x1,...,xp` header and one row per sample.
void write_dataset_csv(std::ostream& out, const Dataset& data);

}  // namespace hdclass
