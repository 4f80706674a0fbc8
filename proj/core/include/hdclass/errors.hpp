#pragma once

#include <stdexcept>
#include <string>

namespace hdclass {

/// Bad input: malformed model, unknown loss name, mismatched sizes.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested estimator does not exist (separable data at lambda = 0,
/// singular Gram/covariance systems, n <= p without regularization).
class IllPosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative routine failed to reach its tolerance, or produced a
/// non-finite / degenerate intermediate.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hdclass
