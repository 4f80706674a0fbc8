#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hdclass/mixture_model.hpp"

namespace hdclass {

/// Flat `key = value` experiment description. See README for the keys.
struct ExperimentConfig {
  int p = 0;
  std::string mean = "ones:1";
  std::string cov = "identity";
  NoiseLaw noise = NoiseLaw::gaussian;
  std::vector<std::string> losses{"logistic"};
  std::vector<double> lambdas{0.0};
  std::vector<int> n_values;
  int reps = 1;
  std::uint64_t seed = 1;
  /// Also fit the optimal combination of all losses on every dataset.
  bool combine = false;
  /// Fill the `ms` column with wall time; off by default so output is reproducible.
  bool timing = false;
  /// 0 means one worker per hardware thread.
  int threads = 0;
  std::string csv;
  std::string svg;
  std::string summary;
  /// Directory of the config file; relative paths resolve against it.
  std::filesystem::path base_dir;
};

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Evaluates numbers such as `0.25`, `sqrt(2/p)`, `6*sqrt(2)` or `2^-6`.
/// The identifier `p` stands for the dimension.
double eval_number(std::string_view expr, int p);

/// Mean-vector patterns: `ones:s`, `block:a,b` (halves), `e1:a`, `csv:path`.
Vector build_mean(std::string_view spec, int p, const std::filesystem::path& base_dir = {});

/// Covariance patterns: `identity`, `scaled:a`, `toeplitz:rho`,
/// `rank1:base,coef` (base*I + coef*v v^T/p with v the second-half indicator),
/// `matrix:path` (p x p CSV) and `eigen:path` (rows of eigenvalue then eigenvector).
MixtureModel build_model(std::string_view mean_spec, std::string_view cov_spec, int p,
                         const std::filesystem::path& base_dir = {});

MixtureModel build_model(const ExperimentConfig& config);

}  // namespace hdclass
