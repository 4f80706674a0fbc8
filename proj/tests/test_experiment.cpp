#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdclass/config.hpp"
#include "hdclass/erm_solver.hpp"
#include "hdclass/errors.hpp"
#include "hdclass/experiment.hpp"
#include "hdclass/figures.hpp"
#include "hdclass/svg_plot.hpp"

using namespace hdclass;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hdclass_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::string run_to_string(const ExperimentConfig& cfg) {
  std::ostringstream out;
  run_experiment(cfg, &out);
  return out.str();
}

}  // namespace

TEST_CASE("number expressions") {
  CHECK(eval_number("0.25", 0) == 0.25);
  CHECK(eval_number("2^-6", 0) == 1.0 / 64.0);
  CHECK(eval_number("2^10", 0) == 1024.0);
  CHECK(eval_number("sqrt(2/p)", 8) == 0.5);
  CHECK(eval_number("6*sqrt(4)", 0) == 12.0);
  CHECK(eval_number("-(1+2)*3", 0) == -9.0);
  CHECK(eval_number("2^3^2", 0) == 512.0);
  CHECK(eval_number("7*p", 60) == 420.0);
  CHECK_THROWS_AS(eval_number("p", 0), InvalidArgument);
  CHECK_THROWS_AS(eval_number("1+", 0), InvalidArgument);
  CHECK_THROWS_AS(eval_number("foo(1)", 0), InvalidArgument);
  CHECK_THROWS_AS(eval_number("(1", 0), InvalidArgument);
}

TEST_CASE("mean and covariance patterns") {
  CHECK(build_mean("ones:2", 3) == Vector::Constant(3, 2.0));
  const Vector e = build_mean("e1:0.6", 4);
  CHECK(e[0] == 0.6);
  CHECK(e.tail(3).norm() == 0.0);
  const Vector b = build_mean("block:1,2", 5);
  CHECK(b.head(2) == Vector::Constant(2, 1.0));
  CHECK(b.tail(3) == Vector::Constant(3, 2.0));
  CHECK_THROWS_AS(build_mean("gauss:1", 3), InvalidArgument);
  CHECK_THROWS_AS(build_mean("block:1", 3), InvalidArgument);

  const MixtureModel scaled = build_model("ones:1", "scaled:2", 4);
  CHECK((scaled.covariance() - 2.0 * Matrix::Identity(4, 4)).norm() < 1e-15);

  const MixtureModel toe = build_model("ones:1", "toeplitz:0.5", 3);
  CHECK(toe.covariance()(0, 2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(build_model("ones:1", "toeplitz:1.5", 3), InvalidArgument);

  const MixtureModel spike = build_model("ones:1", "rank1:1,6", 4);
  const Matrix c = spike.covariance();
  CHECK(c(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c(3, 3) == doctest::Approx(1.0 + 6.0 / 4.0).epsilon(1e-12));
  CHECK(c(2, 3) == doctest::Approx(6.0 / 4.0).epsilon(1e-12));
  CHECK(std::abs(c(0, 3)) < 1e-12);
  CHECK_THROWS_AS(build_model("ones:1", "wishart:3", 3), InvalidArgument);
}

TEST_CASE("file-based model patterns") {
  const fs::path dir = scratch_dir("files");
  {
    std::ofstream(dir / "mu.csv") << "1,2\n3\n";
    std::ofstream(dir / "cov.csv") << "2,0.5,0\n0.5,1,0\n0,0,3\n";
    std::ofstream(dir / "eig.csv") << "# value, vector\n4,1,0,0\n1,0,1,0\n0.5,0,0,1\n";
  }
  CHECK(build_mean("csv:mu.csv", 3, dir) == (Vector(3) << 1, 2, 3).finished());
  CHECK_THROWS_AS(build_mean("csv:mu.csv", 4, dir), InvalidArgument);
  const MixtureModel m = build_model("csv:mu.csv", "matrix:cov.csv", 3, dir);
  CHECK(m.covariance()(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  const MixtureModel e = build_model("ones:1", "eigen:eig.csv", 3, dir);
  CHECK(e.covariance()(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(e.covariance()(2, 2) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(build_model("ones:1", "matrix:missing.csv", 3, dir), InvalidArgument);
}

TEST_CASE("config parsing") {
  const ExperimentConfig cfg = parse(
      "# comment\n"
      "p = 60\n"
      "mu = block:sqrt(2/p), 2*sqrt(2/p)\n"
      "cov = rank1:1,6\n"
      "noise = rademacher\n"
      "losses = logistic, square\n"
      "lambdas = 0, 2^-6, 1  # trailing\n"
      "n = 3*p, 900\n"
      "reps = 4\n"
      "seed = 7\n"
      "combine = true\n"
      "csv = \"out.csv\"\n");
  CHECK(cfg.p == 60);
  CHECK(cfg.mean == "block:sqrt(2/p), 2*sqrt(2/p)");
  CHECK(cfg.noise == NoiseLaw::rademacher);
  CHECK(cfg.losses == std::vector<std::string>{"logistic", "square"});
  CHECK(cfg.lambdas == std::vector<double>{0.0, 1.0 / 64.0, 1.0});
  CHECK(cfg.n_values == std::vector<int>{180, 900});
  CHECK(cfg.reps == 4);
  CHECK(cfg.seed == 7);
  CHECK(cfg.combine);
  CHECK(cfg.csv == "out.csv");
  CHECK(build_model(cfg).dim() == 60);

  CHECK_THROWS_AS(parse("losses = logistic\n"), InvalidArgument);
  CHECK_THROWS_AS(parse("p = 10\nfrobnicate = 3\n"), InvalidArgument);
  CHECK_THROWS_AS(parse("p = 10\nn = 30\nreps = 0\n"), InvalidArgument);
  CHECK_THROWS_AS(parse("p = 10\nn = 30\nlosses = hinge\n"), InvalidArgument);
  CHECK_THROWS_AS(parse("p = 10\nn = 30\ncombine = maybe\n"), InvalidArgument);
  CHECK_THROWS_AS(parse("p = 10\nthis line has no equals sign\n"), InvalidArgument);
  CHECK_THROWS_AS(parse("p = 10\nn = 2.5\n"), InvalidArgument);
}

TEST_CASE("experiment rows cover the full grid") {
  ExperimentConfig cfg = parse(
      "p = 20\nmu = ones:sqrt(2/p)\nlosses = logistic, square\nlambdas = 0, 0.5\n"
      "n = 15, 80\nreps = 3\nseed = 40\ncombine = true\n");
  const ExperimentResult res = run_experiment(cfg);
  CHECK(res.records.size() == 2 * 2 * 3 * 3);
  CHECK(res.theory.size() == 2 * 2 * 2);
  for (const TrialRecord& r : res.records) {
    CAPTURE(r.loss);
    CHECK(r.seed == 40 + static_cast<std::uint64_t>(r.trial));
    if (r.status == "ok") {
      CHECK(r.err_emp >= 0.0);
      CHECK(r.err_emp <= 1.0);
      CHECK(r.err_stoch >= 0.0);
      CHECK(r.err_stoch <= 1.0);
    }
    if (r.lambda == 0.0 && r.n == 15) CHECK(r.status == "ill_posed");
    // Same lambda, different losses: the bias ratios lambda/theta differ, so
    // regularized fits cannot be combined.
    if (r.lambda == 0.5) CHECK(r.status == (r.loss == "logistic+square" ? "mixed_bias" : "ok"));
    CHECK(r.ms == 0.0);
  }

  // Losses share each dataset: refitting the square loss on the seed gives the same error.
  const MixtureModel model = build_model(cfg);
  for (const TrialRecord& r : res.records) {
    if (r.loss != "square" || r.status != "ok") continue;
    const Dataset data = sample_dataset(model, NoiseLaw::gaussian, r.n, r.seed);
    CHECK(classification_error(solve_least_squares(data, r.lambda).beta, model) ==
          doctest::Approx(r.err_emp).epsilon(1e-9));
  }
}

TEST_CASE("experiment output is reproducible and independent of the thread count") {
  ExperimentConfig cfg = parse(
      "p = 30\nmu = e1:1\ncov = toeplitz:0.2\nlosses = logistic, exponential\n"
      "lambdas = 0, 1\nn = 120, 180\nreps = 5\ncombine = true\n");
  cfg.threads = 1;
  const std::string serial = run_to_string(cfg);
  cfg.threads = 4;
  const std::string parallel = run_to_string(cfg);
  CHECK(serial == parallel);
  CHECK(run_to_string(cfg) == parallel);
  std::istringstream in(serial);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "trial,seed,loss,lambda,n,p,err_emp,err_stoch,err_theory,theta_hat,eta_hat,gamma_hat,"
        "kappa_hat,theta,eta,gamma,kappa,status,ms");
}

TEST_CASE("one-shot stochastic prediction along the ridge path") {
  const ExperimentConfig cfg =
      parse("p = 300\nmu = ones:sqrt(2/p)\nlosses = logistic\nlambdas = 2^-6, 2^2\nn = 900\n");
  const ExperimentResult res = run_experiment(cfg);
  REQUIRE(res.records.size() == 2);
  CHECK(std::abs(res.records[0].err_stoch - 0.1225) < 0.005);
  CHECK(std::abs(res.records[0].err_theory - 0.1227) < 0.001);
  CHECK(std::abs(res.records[1].err_theory - 0.0953) < 0.001);
}

TEST_CASE("least-squares learning curve over repeated trials") {
  const ExperimentConfig cfg = parse(
      "p = 300\nmu = block:sqrt(2/p),2*sqrt(2/p)\ncov = rank1:1,6\nlosses = square\n"
      "lambdas = 0\nn = 900\nreps = 500\n");
  const auto curve = aggregate(run_experiment(cfg).records);
  REQUIRE(curve.size() == 1);
  CHECK(curve[0].count == 500);
  CHECK(std::abs(curve[0].err_emp_mean - 0.1424) < 0.004);
}

TEST_CASE("curve aggregation") {
  std::vector<TrialRecord> recs(4);
  const double errs[] = {0.1, 0.3, 0.2, 0.9};
  for (int i = 0; i < 4; ++i) {
    recs[i].loss = i < 3 ? "a" : "b";
    recs[i].lambda = 1.0;
    recs[i].n = 10;
    recs[i].err_emp = errs[i];
    recs[i].err_stoch = errs[i] + 0.01;
    recs[i].err_theory = 0.15;
    recs[i].status = "ok";
  }
  recs[2].status = "ill_posed";
  const auto curve = aggregate(recs);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].loss == "a");
  CHECK(curve[0].count == 2);
  CHECK(curve[0].failed == 1);
  CHECK(curve[0].err_emp_mean == doctest::Approx(0.2));
  CHECK(curve[0].err_emp_se == doctest::Approx(std::sqrt(0.02 / 2.0)));
  CHECK(curve[0].err_stoch_mean == doctest::Approx(0.21));
  CHECK(curve[1].count == 1);
  std::ostringstream out;
  write_curve_header(out);
  write_curve_row(out, "left", curve[0]);
  CHECK(out.str().rfind("panel,loss,lambda,n,count,failed,err_emp_mean", 0) == 0);
}

TEST_CASE("worker pool visits every index and propagates errors") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i].fetch_add(1); });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [](std::size_t i) {
                                 if (i == 37) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  CHECK(resolve_threads(3, 100) == 3);
  CHECK(resolve_threads(8, 2) <= 2);
  CHECK(resolve_threads(0, 100) >= 1);
}

TEST_CASE("run_and_write produces csv, summary and svg") {
  const fs::path dir = scratch_dir("run");
  {
    std::ofstream cfg(dir / "exp.cfg");
    cfg << "p = 20\nmu = ones:1\nlosses = logistic, square\nlambdas = 0.1, 1\nn = 60\nreps = 2\n"
           "csv = out.csv\nsummary = summary.csv\nsvg = plot.svg\n";
  }
  const ExperimentConfig cfg = load_config(dir / "exp.cfg");
  run_and_write(cfg);
  const auto rows = read_csv(dir / "out.csv");
  CHECK(rows.size() == 1 + 2 * 2 * 2);
  CHECK(rows[0].size() == 19);
  const auto summary = read_csv(dir / "summary.csv");
  CHECK(summary[0][0] == "source");
  CHECK(summary.size() > 1);
  std::ifstream svg(dir / "plot.svg");
  std::string text((std::istreambuf_iterator<char>(svg)), {});
  CHECK(text.find("<svg") != std::string::npos);
  CHECK(text.find("</svg>") != std::string::npos);
}

TEST_CASE("svg writer") {
  const fs::path dir = scratch_dir("svg");
  PlotPanel panel;
  panel.title = "t";
  panel.log_x = true;
  panel.series.push_back({"a & b", {1, 10, 100}, {0.1, 0.2, 0.15}, false, false});
  panel.series.push_back({"bars", {0, 1, 2}, {1, 2, 1}, false, true});
  write_svg(dir / "p.svg", {panel, panel});
  std::ifstream svg(dir / "p.svg");
  std::string text((std::istreambuf_iterator<char>(svg)), {});
  CHECK(text.find("a &amp; b") != std::string::npos);
  CHECK(text.find("<polyline") != std::string::npos);
}

TEST_CASE("figure reproduction") {
  CHECK(figure_ids().size() == 7);
  CHECK_THROWS_AS(reproduce_figure("fig9"), InvalidArgument);

  SUBCASE("averaged coefficients follow the deterministic direction") {
    FigureOptions opt;
    opt.out_dir = scratch_dir("fig5");
    opt.reps = 5;
    const auto paths = reproduce_figure("fig5", opt);
    CHECK(paths.size() >= 2);
    const auto rows = read_csv(opt.out_dir / "fig5.csv");
    CHECK(rows[0] == std::vector<std::string>{"lambda", "index", "avg_beta", "expected_beta", "used",
                                              "failed"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (std::stod(rows[i][0]) == 1.0)
        CHECK(std::abs(std::stod(rows[i][3]) - 0.0471) < 5e-4);
    }
  }
  SUBCASE("block mean with a spiked covariance") {
    const MixtureModel model = build_model("block:sqrt(2/p),2*sqrt(2/p)", "rank1:3,6", 60);
    const BetaAverage avg = average_beta(model, Loss::logistic(), 0.0, 420, 4, 1, 2);
    CHECK(avg.used + avg.failed == 4);
    CHECK(std::abs(avg.expected[0] - 0.1657) < 1.5e-3);
  }
  SUBCASE("margin histogram densities are normalized") {
    FigureOptions opt;
    opt.out_dir = scratch_dir("fig3");
    reproduce_figure("fig3", opt);
    const auto rows = read_csv(opt.out_dir / "fig3.csv");
    double mass_r = 0.0;
    double mass_theory_r = 0.0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i][0] != "r") continue;
      const double width = std::stod(rows[i][2]) - std::stod(rows[i][1]);
      mass_r += std::stod(rows[i][3]) * width;
      mass_theory_r += std::stod(rows[i][4]) * width;
    }
    CHECK(mass_r == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mass_theory_r > 0.95);
    CHECK(mass_theory_r <= 1.0 + 1e-6);
  }
}
