#include "hdclass/spectral.hpp"

#include <cmath>

#include "hdclass/errors.hpp"
#include "hdclass/gaussian.hpp"

namespace hdclass {

MarginLaw margin_law(const MixtureModel& model, double shift, double scale, double mean_coef,
                     double noise_coef) {
  const Vector& ev = model.cov_eigvals();
  const Vector& w = model.mean_eigen_weights();
  double a = 0.0;
  double b = 0.0;
  double t = 0.0;
  for (Eigen::Index d = 0; d < ev.size(); ++d) {
    const double denom = shift + scale * ev[d];
    if (!(denom > 0.0)) throw NumericalFailure("margin law: resolvent is not positive definite");
    const double ratio = ev[d] / denom;
    a += w[d] / denom;
    b += w[d] * ratio / denom;
    t += ratio * ratio;
  }
  MarginLaw law;
  law.mean = mean_coef * a;
  law.spread = std::sqrt(mean_coef * mean_coef * b + noise_coef * noise_coef * t / model.dim());
  return law;
}

double margin_law_error(const MarginLaw& law) {
  if (!(law.spread > 0.0)) throw NumericalFailure("margin law: zero spread");
  return gaussian_q(law.mean / law.spread);
}

}  // namespace hdclass
