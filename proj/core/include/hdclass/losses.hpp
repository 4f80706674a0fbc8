#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace hdclass {

/// A smooth convex margin loss t -> l(t) with its first two derivatives.
///
/// Built-ins dispatch on a tag so the hot paths (prox inversion, Newton
/// Hessians) avoid an indirect call. `custom` exists for smoothed surrogates
/// of non-smooth losses: pass the member of the smoothing family you want.
class Loss {
 public:
  enum class Kind { logistic, square, exponential, square_root, custom };

  using ScalarFn = std::function<double(double)>;

  static Loss logistic() { return Loss(Kind::logistic, "logistic"); }
  static Loss square() { return Loss(Kind::square, "square"); }
  static Loss exponential() { return Loss(Kind::exponential, "exponential"); }
  static Loss square_root() { return Loss(Kind::square_root, "square_root"); }

  /// User-provided loss. The caller vouches for convexity and l'(0) < 0;
  /// `has_finite_minimizer` tells the solver whether unregularized fits on
  /// separable data have a solution.
  static Loss custom(std::string name, ScalarFn value, ScalarFn d1, ScalarFn d2,
                     bool has_finite_minimizer);

  [[nodiscard]] double value(double t) const;
  [[nodiscard]] double d1(double t) const;
  [[nodiscard]] double d2(double t) const;

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] bool has_closed_prox() const { return kind_ == Kind::square; }
  /// False for losses that keep decreasing as t grows (logistic, exponential).
  [[nodiscard]] bool has_finite_minimizer() const { return finite_minimizer_; }

 private:
  Loss(Kind kind, std::string name);

  Kind kind_;
  std::string name_;
  bool finite_minimizer_ = true;
  ScalarFn value_;
  ScalarFn d1_;
  ScalarFn d2_;
};

/// Looks up logistic, square, exponential or square_root (alias `sqrt`).
Loss builtin_loss(std::string_view name);

/// Unique solution a of a + kappa * l'(a) = t, i.e. the minimizer of
/// l(a) + (a - t)^2 / (2 kappa).
double prox(const Loss& loss, double kappa, double t);

/// (prox(t) - t) / kappa, evaluated as -l'(prox(t)) to avoid cancellation.
double h_map(const Loss& loss, double kappa, double t);

}  // namespace hdclass
