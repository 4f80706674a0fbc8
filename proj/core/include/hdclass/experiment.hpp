#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "hdclass/config.hpp"
#include "hdclass/theory.hpp"

namespace hdclass {

/// One fitted classifier (or one combination, loss names joined by `+`).
/// Error fields are NaN when the corresponding step did not succeed.
struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string loss;
  double lambda = 0.0;
  int n = 0;
  int p = 0;
  double err_emp = 0.0;
  double err_stoch = 0.0;
  double err_theory = 0.0;
  double theta_hat = 0.0;
  double eta_hat = 0.0;
  double gamma_hat = 0.0;
  double kappa_hat = 0.0;
  double theta = 0.0;
  double eta = 0.0;
  double gamma = 0.0;
  double kappa = 0.0;
  /// ok, ill_posed, numerical_failure or mixed_bias
  std::string status;
  double ms = 0.0;
};

void write_trial_header(std::ostream& out);
void write_trial_row(std::ostream& out, const TrialRecord& rec);

/// Deterministic theory for one grid point; `status` says why it is missing.
struct TheoryPoint {
  std::string loss;
  double lambda = 0.0;
  int n = 0;
  bool ok = false;
  TheoryState state;
  std::string status;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  std::vector<TheoryPoint> theory;
};

/// Runs every (n, lambda, trial) cell on a worker pool. Trial t at sample
/// size n uses seed base_seed + t for every loss and lambda, so losses are
/// compared on identical data. When `sink` is given, rows are streamed to it
/// in canonical order as soon as all earlier rows are complete.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* sink = nullptr);

/// Runs the experiment and writes the csv / summary / svg outputs named in
/// the config. Trial rows go to `fallback` when the config names no csv.
ExperimentResult run_and_write(const ExperimentConfig& config, std::ostream* fallback = nullptr);

/// Mean curve over trials for one (loss, lambda, n) grid point.
struct CurvePoint {
  std::string loss;
  double lambda = 0.0;
  int n = 0;
  int count = 0;
  int failed = 0;
  double err_emp_mean = 0.0;
  double err_emp_se = 0.0;
  double err_stoch_mean = 0.0;
  double err_theory = 0.0;
};

/// Groups successful records by (loss, lambda, n) in order of first appearance.
std::vector<CurvePoint> aggregate(const std::vector<TrialRecord>& records);

void write_curve_header(std::ostream& out);
void write_curve_row(std::ostream& out, const std::string& panel, const CurvePoint& pt);

/// Resolves the worker count: 0 means hardware concurrency.
int resolve_threads(int requested, std::size_t tasks);

/// Calls fn(i) for every i in [0, count) from a pool of workers that pull
/// indices off a shared counter. The first exception stops the pool and is
/// rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace hdclass
