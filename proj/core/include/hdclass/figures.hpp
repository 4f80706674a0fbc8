#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "hdclass/losses.hpp"
#include "hdclass/mixture_model.hpp"

namespace hdclass {

struct FigureOptions {
  std::filesystem::path out_dir = ".";
  /// Replications; 0 picks the figure's own default.
  int reps = 0;
  std::uint64_t seed = 1;
  int threads = 0;
  int bins = 40;
};

/// fig1 ... fig7
const std::vector<std::string>& figure_ids();

/// Writes `<id>.csv`, `<id>.svg` and any auxiliary CSVs into out_dir and
/// returns their paths. Unknown ids throw InvalidArgument.
std::vector<std::filesystem::path> reproduce_figure(std::string_view fig_id,
                                                    const FigureOptions& options = {});

/// Leave-one-out margin statistics of one fit compared with the fixed point.
struct MarginCheck {
  Vector r;
  Vector c;
  double r_mean = 0.0;
  double r_var = 0.0;
  double m = 0.0;
  double sigma = 0.0;
  double kappa = 0.0;
  /// Residual map of the deterministic limit.
  Vector h_of_r;
  /// median_i |c_i - h(r_i)|
  double median_deviation = 0.0;
};

MarginCheck margin_check(const MixtureModel& model, const Loss& loss, double lambda, int n,
                         std::uint64_t seed);

/// Coordinate-wise mean of fitted beta over independent datasets next to
/// eta (lambda I + theta C)^{-1} mu.
struct BetaAverage {
  Vector average;
  Vector expected;
  int used = 0;
  int failed = 0;
};

BetaAverage average_beta(const MixtureModel& model, const Loss& loss, double lambda, int n,
                         int reps, std::uint64_t seed, int threads = 0);

struct MixingPoint {
  double rho = 0.0;
  double err_emp = 0.0;
  double err_stoch = 0.0;
};

struct MixingCurve {
  std::vector<MixingPoint> points;
  /// Mixing ratio and errors of the optimal combination.
  MixingPoint optimum;
};

/// Two unregularized fits on one dataset combined as
/// a_1 = rho theta_1 / eta_1, a_2 = (1 - rho) theta_2 / eta_2.
MixingCurve mixing_curve(const MixtureModel& model, const Loss& first, const Loss& second, int n,
                         std::uint64_t seed, const std::vector<double>& rhos);

}  // namespace hdclass
