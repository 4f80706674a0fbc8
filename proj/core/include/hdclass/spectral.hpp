#pragma once

#include "hdclass/mixture_model.hpp"

namespace hdclass {

/// Mean and spread of the test margin of a classifier that behaves like
/// (shift I + scale C)^{-1} (mean_coef mu + noise_coef C^{1/2} u / sqrt(p)).
struct MarginLaw {
  double mean = 0.0;
  double spread = 0.0;
};

/// Evaluated from the eigenvalues of C, so each call is O(p).
MarginLaw margin_law(const MixtureModel& model, double shift, double scale, double mean_coef,
                     double noise_coef);

/// Q(mean / spread) for a margin law.
double margin_law_error(const MarginLaw& law);

}  // namespace hdclass
