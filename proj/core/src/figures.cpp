#include "hdclass/figures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include "hdclass/combiner.hpp"
#include "hdclass/config.hpp"
#include "hdclass/erm_solver.hpp"
#include "hdclass/errors.hpp"
#include "hdclass/experiment.hpp"
#include "hdclass/gaussian.hpp"
#include "hdclass/observables.hpp"
#include "hdclass/svg_plot.hpp"
#include "hdclass/theory.hpp"

namespace hdclass {

namespace {

using Path = std::filesystem::path;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ofstream open_out(const Path& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double med = v[mid];
  if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return med;
}

// The residual map is nonincreasing in r, so the preimage of a level set is
// found by bisection on [lo, hi]; levels outside the range clamp to the ends.
double invert_residual_map(const Loss& loss, double kappa, double level, double lo, double hi) {
  if (h_map(loss, kappa, lo) <= level) return lo;
  if (h_map(loss, kappa, hi) >= level) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h_map(loss, kappa, mid) > level) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct Histogram {
  std::vector<double> edges;
  std::vector<double> density;
};

Histogram histogram(const Vector& values, int bins) {
  Histogram h;
  const double lo = values.minCoeff();
  double hi = values.maxCoeff();
  if (!(hi > lo)) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) h.edges[static_cast<std::size_t>(b)] = lo + width * b;
  h.density.assign(static_cast<std::size_t>(bins), 0.0);
  for (double v : values) {
    auto b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, bins - 1);
    h.density[static_cast<std::size_t>(b)] += 1.0;
  }
  for (double& d : h.density) d /= static_cast<double>(values.size()) * width;
  return h;
}

struct CurvePanel {
  std::string name;
  bool along_lambda = true;
  std::vector<CurvePoint> points;
};

PlotPanel curve_plot(const CurvePanel& cp, const std::string& title, bool with_stochastic) {
  PlotPanel panel;
  panel.title = title;
  panel.x_label = cp.along_lambda ? "lambda" : "n";
  panel.y_label = "classification error";
  panel.log_x = cp.along_lambda;
  std::map<std::string, std::vector<PlotSeries>> by_loss;
  std::vector<std::string> order;
  for (const auto& pt : cp.points) {
    if (!by_loss.count(pt.loss)) {
      order.push_back(pt.loss);
      by_loss[pt.loss] = {PlotSeries{pt.loss + " empirical", {}, {}, true},
                          PlotSeries{pt.loss + (with_stochastic ? " stochastic" : " theory"), {}, {}, false}};
    }
    const double x = cp.along_lambda ? pt.lambda : static_cast<double>(pt.n);
    auto& s = by_loss[pt.loss];
    s[0].x.push_back(x);
    s[0].y.push_back(pt.err_emp_mean);
    s[1].x.push_back(x);
    s[1].y.push_back(with_stochastic ? pt.err_stoch_mean : pt.err_theory);
  }
  for (const auto& name : order)
    for (auto& s : by_loss[name]) panel.series.push_back(std::move(s));
  return panel;
}

ExperimentConfig base_config(int p, std::string mean, std::string cov, const FigureOptions& opt,
                             int default_reps) {
  ExperimentConfig c;
  c.p = p;
  c.mean = std::move(mean);
  c.cov = std::move(cov);
  c.reps = opt.reps > 0 ? opt.reps : default_reps;
  c.seed = opt.seed;
  c.threads = opt.threads;
  return c;
}

std::vector<Path> error_curves(const std::string& id, const std::string& mean,
                               const std::string& cov, int default_reps, bool stochastic,
                               const FigureOptions& opt) {
  constexpr int p = 300;
  std::vector<double> lambdas;
  for (int k = -6; k <= 10; ++k) lambdas.push_back(std::ldexp(1.0, k));

  ExperimentConfig left = base_config(p, mean, cov, opt, default_reps);
  left.losses = {"logistic"};
  left.lambdas = lambdas;
  left.n_values = {900};

  ExperimentConfig right = base_config(p, mean, cov, opt, default_reps);
  right.losses = {"square"};
  right.lambdas = {0.0};
  for (int n = 900; n <= 3000; n += 300) right.n_values.push_back(n);

  const Path trials_path = opt.out_dir / (id + "_trials.csv");
  std::ofstream trials = open_out(trials_path);
  const ExperimentResult res_left = run_experiment(left, &trials);
  const ExperimentResult res_right = run_experiment(right, nullptr);
  for (const auto& r : res_right.records) write_trial_row(trials, r);

  const CurvePanel lp{"left", true, aggregate(res_left.records)};
  const CurvePanel rp{"right", false, aggregate(res_right.records)};
  const Path csv_path = opt.out_dir / (id + ".csv");
  std::ofstream csv = open_out(csv_path);
  write_curve_header(csv);
  for (const auto* cp : {&lp, &rp})
    for (const auto& pt : cp->points) write_curve_row(csv, cp->name, pt);

  const Path svg_path = opt.out_dir / (id + ".svg");
  write_svg(svg_path, {curve_plot(lp, "logistic, n = 900", stochastic),
                       curve_plot(rp, "square loss, lambda = 0", stochastic)});
  return {csv_path, svg_path, trials_path};
}

std::vector<Path> fig3(const FigureOptions& opt) {
  constexpr int p = 256;
  const MixtureModel model = build_model("e1:1", "scaled:2", p);
  const Loss loss = Loss::logistic();
  const MarginCheck mc = margin_check(model, loss, 0.0, 6 * p, opt.seed);

  const Histogram hr = histogram(mc.r, opt.bins);
  const Histogram hc = histogram(mc.c, opt.bins);
  const double lo = mc.m - 40.0 * mc.sigma;
  const double hi = mc.m + 40.0 * mc.sigma;
  auto r_prob = [&](double a, double b) {
    return gaussian_cdf((b - mc.m) / mc.sigma) - gaussian_cdf((a - mc.m) / mc.sigma);
  };

  const Path csv_path = opt.out_dir / "fig3.csv";
  std::ofstream csv = open_out(csv_path);
  csv << "variable,bin_lo,bin_hi,empirical_density,theory_density\n";
  PlotPanel pr{"leave-one-out margins r", "r", "density", false, {}};
  PlotPanel pc{"dual variables c", "c", "density", false, {}};
  PlotSeries r_bars{"empirical", {}, {}, false, true};
  PlotSeries r_line{"N(m, sigma^2)", {}, {}, false, false};
  PlotSeries c_bars{"empirical", {}, {}, false, true};
  PlotSeries c_line{"h(r), r ~ N(m, sigma^2)", {}, {}, false, false};
  for (std::size_t b = 0; b + 1 < hr.edges.size(); ++b) {
    const double a = hr.edges[b];
    const double e = hr.edges[b + 1];
    const double theory = r_prob(a, e) / (e - a);
    csv << "r," << num(a) << ',' << num(e) << ',' << num(hr.density[b]) << ',' << num(theory) << '\n';
    r_bars.x.push_back(a);
    r_bars.y.push_back(hr.density[b]);
    r_line.x.push_back(0.5 * (a + e));
    r_line.y.push_back(gaussian_pdf((0.5 * (a + e) - mc.m) / mc.sigma) / mc.sigma);
  }
  for (std::size_t b = 0; b + 1 < hc.edges.size(); ++b) {
    const double a = hc.edges[b];
    const double e = hc.edges[b + 1];
    // c in [a, e] exactly when r lies between the preimages of e and a.
    const double r_hi = invert_residual_map(loss, mc.kappa, a, lo, hi);
    const double r_lo = invert_residual_map(loss, mc.kappa, e, lo, hi);
    const double theory = r_prob(r_lo, r_hi) / (e - a);
    csv << "c," << num(a) << ',' << num(e) << ',' << num(hc.density[b]) << ',' << num(theory) << '\n';
    c_bars.x.push_back(a);
    c_bars.y.push_back(hc.density[b]);
    c_line.x.push_back(0.5 * (a + e));
    c_line.y.push_back(theory);
  }
  pr.series = {r_bars, r_line};
  pc.series = {c_bars, c_line};

  const Path summary_path = opt.out_dir / "fig3_summary.csv";
  std::ofstream summary = open_out(summary_path);
  summary << "quantity,empirical,theory\n";
  summary << "r_mean," << num(mc.r_mean) << ',' << num(mc.m) << '\n';
  summary << "r_var," << num(mc.r_var) << ',' << num(mc.sigma * mc.sigma) << '\n';
  summary << "median_abs_c_minus_h," << num(mc.median_deviation) << ",0\n";

  const Path svg_path = opt.out_dir / "fig3.svg";
  write_svg(svg_path, {pr, pc});
  return {csv_path, svg_path, summary_path};
}

std::vector<Path> beta_figure(const std::string& id, const MixtureModel& model,
                              const FigureOptions& opt) {
  const int n = 7 * model.dim();
  const int reps = opt.reps > 0 ? opt.reps : 1000;
  const Path csv_path = opt.out_dir / (id + ".csv");
  std::ofstream csv = open_out(csv_path);
  csv << "lambda,index,avg_beta,expected_beta,used,failed\n";
  std::vector<PlotPanel> panels;
  for (double lambda : {0.0, 1.0}) {
    const BetaAverage avg = average_beta(model, Loss::logistic(), lambda, n, reps, opt.seed, opt.threads);
    PlotPanel panel{"lambda = " + num(lambda), "index", "beta coordinate", false, {}};
    PlotSeries emp{"avg beta", {}, {}, true};
    PlotSeries theo{"E beta", {}, {}, false};
    for (Eigen::Index i = 0; i < avg.average.size(); ++i) {
      csv << num(lambda) << ',' << i + 1 << ',' << num(avg.average[i]) << ','
          << num(avg.expected[i]) << ',' << avg.used << ',' << avg.failed << '\n';
      emp.x.push_back(static_cast<double>(i + 1));
      emp.y.push_back(avg.average[i]);
      theo.x.push_back(static_cast<double>(i + 1));
      theo.y.push_back(avg.expected[i]);
    }
    panel.series = {emp, theo};
    panels.push_back(std::move(panel));
  }
  const Path svg_path = opt.out_dir / (id + ".svg");
  write_svg(svg_path, panels);
  return {csv_path, svg_path};
}

std::vector<Path> fig6(const FigureOptions& opt) {
  constexpr int p = 256;
  std::vector<double> rhos;
  for (int k = -16; k <= 16; ++k) rhos.push_back(0.25 * k);
  struct Setup {
    std::string name;
    MixtureModel model;
    Loss first;
    Loss second;
  };
  const std::vector<Setup> setups{
      {"left", build_model("e1:1", "scaled:2", p), Loss::logistic(), Loss::exponential()},
      {"right", build_model("block:1/sqrt(2*p),-1/sqrt(2*p)", "toeplitz:0.1", p), Loss::square(),
       Loss::logistic()}};

  const Path csv_path = opt.out_dir / "fig6.csv";
  std::ofstream csv = open_out(csv_path);
  csv << "panel,losses,rho,err_emp,err_stoch,optimal\n";
  std::vector<PlotPanel> panels;
  for (const auto& s : setups) {
    const MixingCurve curve = mixing_curve(s.model, s.first, s.second, 10 * p, opt.seed, rhos);
    const std::string pair = s.first.name() + "+" + s.second.name();
    PlotPanel panel{pair, "rho", "classification error", false, {}};
    PlotSeries emp{"empirical", {}, {}, true};
    PlotSeries pred{"stochastic prediction", {}, {}, false};
    for (const auto& pt : curve.points) {
      csv << s.name << ',' << pair << ',' << num(pt.rho) << ',' << num(pt.err_emp) << ','
          << num(pt.err_stoch) << ",0\n";
      emp.x.push_back(pt.rho);
      emp.y.push_back(pt.err_emp);
      pred.x.push_back(pt.rho);
      pred.y.push_back(pt.err_stoch);
    }
    csv << s.name << ',' << pair << ',' << num(curve.optimum.rho) << ','
        << num(curve.optimum.err_emp) << ',' << num(curve.optimum.err_stoch) << ",1\n";
    panel.series = {emp, pred};
    panels.push_back(std::move(panel));
  }
  const Path svg_path = opt.out_dir / "fig6.svg";
  write_svg(svg_path, panels);
  return {csv_path, svg_path};
}

std::vector<Path> fig7(const FigureOptions& opt) {
  constexpr int p = 250;
  ExperimentConfig config = base_config(p, "e1:0.6", "identity", opt, 300);
  config.losses = {"logistic", "square_root"};
  config.lambdas = {0.0};
  config.combine = true;
  for (int k = 0; k <= 5; ++k) config.n_values.push_back(static_cast<int>(std::lround(p * (7.0 + 0.2 * k))));

  const Path trials_path = opt.out_dir / "fig7_trials.csv";
  std::ofstream trials = open_out(trials_path);
  const ExperimentResult res = run_experiment(config, &trials);
  const MixtureModel model = build_model(config);

  const Path csv_path = opt.out_dir / "fig7.csv";
  std::ofstream csv = open_out(csv_path);
  write_curve_header(csv);
  const std::vector<CurvePoint> points = aggregate(res.records);
  for (const auto& pt : points) write_curve_row(csv, "main", pt);
  PlotPanel panel{"unregularized fits and their optimal combination", "n / p",
                  "classification error", false, {}};
  std::map<std::string, PlotSeries> series;
  std::vector<std::string> order;
  for (const auto& pt : points) {
    if (!series.count(pt.loss)) {
      order.push_back(pt.loss);
      series[pt.loss] = PlotSeries{pt.loss, {}, {}, false};
    }
    series[pt.loss].x.push_back(static_cast<double>(pt.n) / p);
    series[pt.loss].y.push_back(pt.err_emp_mean);
  }
  PlotSeries ls{"least squares (theory)", {}, {}, false};
  for (int n : config.n_values) {
    CurvePoint pt;
    pt.loss = "square";
    pt.n = n;
    pt.err_theory = predicted_error(square_loss_state(model, 0.0, n));
    pt.err_emp_mean = pt.err_emp_se = pt.err_stoch_mean = kNaN;
    write_curve_row(csv, "ls_theory", pt);
    ls.x.push_back(static_cast<double>(n) / p);
    ls.y.push_back(pt.err_theory);
  }
  for (const auto& name : order) panel.series.push_back(series[name]);
  panel.series.push_back(ls);
  const Path svg_path = opt.out_dir / "fig7.svg";
  write_svg(svg_path, {panel});
  return {csv_path, svg_path, trials_path};
}

}  // namespace

const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids{"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"};
  return ids;
}

std::vector<Path> reproduce_figure(std::string_view fig_id, const FigureOptions& options) {
  if (options.bins < 1) throw InvalidArgument("figure: bins must be positive");
  const auto& ids = figure_ids();
  if (std::find(ids.begin(), ids.end(), fig_id) == ids.end())
    throw InvalidArgument("unknown figure '" + std::string(fig_id) + "' (expected fig1 ... fig7)");
  std::filesystem::create_directories(options.out_dir);
  if (fig_id == "fig1")
    return error_curves("fig1", "block:sqrt(2/p),2*sqrt(2/p)", "rank1:1,6", 500, false, options);
  if (fig_id == "fig2") return error_curves("fig2", "ones:sqrt(2/p)", "identity", 1, true, options);
  if (fig_id == "fig3") return fig3(options);
  if (fig_id == "fig4")
    return beta_figure("fig4", build_model("block:sqrt(2/p),2*sqrt(2/p)", "rank1:3,6", 60), options);
  if (fig_id == "fig5") return beta_figure("fig5", build_model("ones:sqrt(2/p)", "scaled:2", 60), options);
  if (fig_id == "fig6") return fig6(options);
  if (fig_id == "fig7") return fig7(options);
  throw InvalidArgument("unknown figure '" + std::string(fig_id) + "' (expected fig1 ... fig7)");
}

MarginCheck margin_check(const MixtureModel& model, const Loss& loss, double lambda, int n,
                         std::uint64_t seed) {
  const TheoryState state = solve_fixed_point(model, loss, lambda, n);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, n, seed);
  const ErmSolution sol = solve_erm(data, loss, lambda);
  const EmpiricalObservables obs = compute_observables(data, sol, loss);

  MarginCheck mc;
  mc.r = obs.r;
  mc.c = obs.c;
  mc.m = state.m;
  mc.sigma = state.sigma;
  mc.kappa = state.kappa;
  mc.r_mean = obs.r.mean();
  mc.r_var = (obs.r.array() - mc.r_mean).square().sum() / static_cast<double>(n - 1);
  mc.h_of_r.resize(n);
  std::vector<double> dev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    mc.h_of_r[i] = h_map(loss, state.kappa, obs.r[i]);
    dev[static_cast<std::size_t>(i)] = std::abs(obs.c[i] - mc.h_of_r[i]);
  }
  mc.median_deviation = median(std::move(dev));
  return mc;
}

BetaAverage average_beta(const MixtureModel& model, const Loss& loss, double lambda, int n,
                         int reps, std::uint64_t seed, int threads) {
  if (reps < 1) throw InvalidArgument("average_beta: reps must be positive");
  const TheoryState state = solve_fixed_point(model, loss, lambda, n);
  std::vector<Vector> betas(static_cast<std::size_t>(reps));
  parallel_for(betas.size(), threads, [&](std::size_t t) {
    const Dataset data = sample_dataset(model, NoiseLaw::gaussian, n, seed + t);
    try {
      betas[t] = solve_erm(data, loss, lambda).beta;
    } catch (const IllPosed&) {
    }
  });

  BetaAverage out;
  out.average = Vector::Zero(model.dim());
  for (const auto& b : betas) {
    if (b.size() == 0) {
      ++out.failed;
      continue;
    }
    out.average += b;
    ++out.used;
  }
  if (out.used > 0) out.average /= out.used;
  out.expected = state.eta * model.apply_shifted_inverse(lambda, state.theta, model.mean());
  return out;
}

MixingCurve mixing_curve(const MixtureModel& model, const Loss& first, const Loss& second, int n,
                         std::uint64_t seed, const std::vector<double>& rhos) {
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, n, seed);
  const std::vector<ErmSolution> sols{solve_erm(data, first, 0.0), solve_erm(data, second, 0.0)};
  const std::vector<EmpiricalObservables> obs{compute_observables(data, sols[0], first),
                                              compute_observables(data, sols[1], second)};
  auto point = [&](const Vector& a) {
    // rho = a_1 eta_1 / theta_1 normalized by the same sum over both fits
    const double s1 = a[0] * obs[0].eta_hat / obs[0].theta_hat;
    const double s2 = a[1] * obs[1].eta_hat / obs[1].theta_hat;
    MixingPoint pt;
    pt.rho = s1 / (s1 + s2);
    pt.err_emp = classification_error(a[0] * sols[0].beta + a[1] * sols[1].beta, model);
    pt.err_stoch = predicted_combination_error(obs, a, model, 0.0);
    return pt;
  };

  MixingCurve curve;
  for (double rho : rhos) {
    Vector a(2);
    a << rho * obs[0].theta_hat / obs[0].eta_hat, (1.0 - rho) * obs[1].theta_hat / obs[1].eta_hat;
    curve.points.push_back(point(a));
  }
  const CombinationResult best = optimal_combination(obs, sols, model);
  curve.optimum = point(best.weights);
  return curve;
}

}  // namespace hdclass
