#include "hdclass/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hdclass/errors.hpp"

namespace hdclass {

namespace {

constexpr double kProxTol = 1e-12;
constexpr int kProxMaxIter = 200;

// sigmoid(-t) = 1 / (1 + e^t), evaluated without overflow.
double logistic_tail(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

Loss::Loss(Kind kind, std::string name) : kind_(kind), name_(std::move(name)) {
  finite_minimizer_ = kind == Kind::square || kind == Kind::square_root;
}

Loss Loss::custom(std::string name, ScalarFn value, ScalarFn d1, ScalarFn d2,
                  bool has_finite_minimizer) {
  if (!value || !d1 || !d2) throw InvalidArgument("custom loss needs value and two derivatives");
  Loss loss(Kind::custom, std::move(name));
  loss.value_ = std::move(value);
  loss.d1_ = std::move(d1);
  loss.d2_ = std::move(d2);
  loss.finite_minimizer_ = has_finite_minimizer;
  return loss;
}

double Loss::value(double t) const {
  switch (kind_) {
    case Kind::logistic:
      // log(1 + e^{-t}) = max(-t, 0) + log1p(e^{-|t|})
      return std::max(-t, 0.0) + std::log1p(std::exp(-std::abs(t)));
    case Kind::square:
      return 0.5 * (t - 1.0) * (t - 1.0);
    case Kind::exponential:
      return std::exp(-t);
    case Kind::square_root:
      return std::hypot(t - 1.0, 1.0);
    case Kind::custom:
      return value_(t);
  }
  return 0.0;
}

double Loss::d1(double t) const {
  switch (kind_) {
    case Kind::logistic:
      return -logistic_tail(t);
    case Kind::square:
      return t - 1.0;
    case Kind::exponential:
      return -std::exp(-t);
    case Kind::square_root:
      return (t - 1.0) / std::hypot(t - 1.0, 1.0);
    case Kind::custom:
      return d1_(t);
  }
  return 0.0;
}

double Loss::d2(double t) const {
  switch (kind_) {
    case Kind::logistic: {
      const double s = logistic_tail(t);
      return s * (1.0 - s);
    }
    case Kind::square:
      return 1.0;
    case Kind::exponential:
      return std::exp(-t);
    case Kind::square_root: {
      const double r = std::hypot(t - 1.0, 1.0);
      return 1.0 / (r * r * r);
    }
    case Kind::custom:
      return d2_(t);
  }
  return 0.0;
}

Loss builtin_loss(std::string_view name) {
  if (name == "logistic") return Loss::logistic();
  if (name == "square") return Loss::square();
  if (name == "exponential") return Loss::exponential();
  if (name == "square_root" || name == "sqrt") return Loss::square_root();
  throw InvalidArgument("unknown loss '" + std::string(name) + "'");
}

double prox(const Loss& loss, double kappa, double t) {
  if (!(kappa > 0.0) || !std::isfinite(kappa))
    throw InvalidArgument("prox: kappa must be positive and finite");
  if (!std::isfinite(t)) throw InvalidArgument("prox: non-finite argument");
  if (loss.has_closed_prox()) return (t + kappa) / (1.0 + kappa);

  // f(a) = a + kappa*l'(a) - t is strictly increasing with slope >= 1.
  auto f = [&](double a) { return a + kappa * loss.d1(a) - t; };
  const double tol = kProxTol * std::max(1.0, std::abs(t));

  double f_t = f(t);
  if (f_t == 0.0) return t;
  // The root lies between t and t - kappa*l'(t), but for steep losses that
  // endpoint can sit astronomically far away. Walking out from t with doubling
  // steps keeps the bracket within twice the distance to the root.
  double lo = t;
  double hi = t;
  double f_lo = f_t;
  double f_hi = f_t;
  const double reach = std::abs(kappa * loss.d1(t));
  double step = std::isfinite(reach) && reach > 0.0 ? std::min(reach, 1.0) : 1.0;
  for (int grow = 0; (f_lo > 0.0 || f_hi < 0.0) && grow < 2100; ++grow) {
    if (f_lo > 0.0) {
      hi = lo;
      f_hi = f_lo;
      lo -= step;
      f_lo = f(lo);
    } else {
      lo = hi;
      f_lo = f_hi;
      hi += step;
      f_hi = f(hi);
    }
    step *= 2.0;
  }
  // Overflowed endpoints (f = -inf or +inf) still carry a usable sign.
  if (!(f_lo <= 0.0 && f_hi >= 0.0))
    throw NumericalFailure("prox: could not bracket the root for loss " + loss.name());
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;

  // Newton that falls back to bisection whenever the step leaves the bracket
  // or fails to halve relative to the step before last.
  double a = std::clamp(t, lo, hi);
  double dx_old = hi - lo;
  double dx = dx_old;
  for (int it = 0; it < kProxMaxIter; ++it) {
    const double fa = f(a);
    if (std::abs(fa) <= tol) return a;
    if (fa < 0.0) {
      lo = a;
    } else {
      hi = a;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a)))
      return a;
    const double slope = 1.0 + kappa * loss.d2(a);
    const double next = a - fa / slope;
    if (!(next > lo && next < hi) || std::abs(2.0 * fa) > std::abs(dx_old * slope)) {
      dx_old = dx;
      dx = 0.5 * (hi - lo);
      a = lo + dx;
    } else {
      dx_old = dx;
      dx = fa / slope;
      a = next;
    }
  }
  throw NumericalFailure("prox: no convergence for loss " + loss.name() + " at kappa " +
                         std::to_string(kappa) + ", t " + std::to_string(t) +
                         " (is t + kappa*l'(t) monotone?)");
}

double h_map(const Loss& loss, double kappa, double t) {
  if (loss.has_closed_prox()) return (1.0 - t) / (1.0 + kappa);
  return -loss.d1(prox(loss, kappa, t));
}

}  // namespace hdclass
