#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hdclass/config.hpp"
#include "hdclass/errors.hpp"
#include "hdclass/experiment.hpp"
#include "hdclass/figures.hpp"
#include "hdclass/mixture_model.hpp"
#include "hdclass/selftest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailedChecks = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo and fixed-point analysis of linear classifiers on Gaussian mixtures"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = -1;
  auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--threads", threads, "Worker threads (0 = all cores)");

  std::string fig_id;
  hdclass::FigureOptions fig_opt;
  auto* figure = app.add_subcommand("figure", "Reproduce one of the reference figures");
  figure->add_option("fig_id", fig_id, "fig1 ... fig7")->required();
  figure->add_option("--out", fig_opt.out_dir, "Output directory");
  figure->add_option("--reps", fig_opt.reps, "Replications (default depends on the figure)");
  figure->add_option("--seed", fig_opt.seed, "Base seed");
  figure->add_option("--threads", fig_opt.threads, "Worker threads (0 = all cores)");
  figure->add_option("--bins", fig_opt.bins, "Histogram bins");

  int n = 0;
  std::uint64_t seed = 1;
  auto* sample = app.add_subcommand("sample", "Write one dataset drawn from the config's model as CSV");
  sample->add_option("config", config_path, "Config file")->required();
  sample->add_option("--n", n, "Sample size")->required();
  sample->add_option("--seed", seed, "Seed");

  int selftest_threads = 0;
  auto* selftest = app.add_subcommand("selftest", "Run the built-in property checks");
  selftest->add_option("--threads", selftest_threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      hdclass::ExperimentConfig config = hdclass::load_config(config_path);
      if (threads >= 0) config.threads = threads;
      hdclass::run_and_write(config, &std::cout);
    } else if (*figure) {
      for (const auto& path : hdclass::reproduce_figure(fig_id, fig_opt))
        std::cout << path.string() << '\n';
    } else if (*sample) {
      const hdclass::ExperimentConfig config = hdclass::load_config(config_path);
      const hdclass::MixtureModel model = hdclass::build_model(config);
      hdclass::write_dataset_csv(std::cout, hdclass::sample_dataset(model, config.noise, n, seed));
    } else if (*selftest) {
      return hdclass::run_selftest(std::cout, selftest_threads) ? kExitOk : kExitFailedChecks;
    }
  } catch (const hdclass::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const hdclass::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const hdclass::IllPosed& e) {
    std::cerr << "ill-posed problem: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
