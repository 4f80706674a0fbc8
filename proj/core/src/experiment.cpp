#include "hdclass/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include "hdclass/combiner.hpp"
#include "hdclass/erm_solver.hpp"
#include "hdclass/errors.hpp"
#include "hdclass/observables.hpp"
#include "hdclass/svg_plot.hpp"

namespace hdclass {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string status_of(const std::exception& e) {
  if (dynamic_cast<const IllPosed*>(&e) != nullptr) return "ill_posed";
  return "numerical_failure";
}

TrialRecord blank_record(int trial, std::uint64_t seed, const std::string& loss, double lambda,
                         int n, int p) {
  TrialRecord r;
  r.trial = trial;
  r.seed = seed;
  r.loss = loss;
  r.lambda = lambda;
  r.n = n;
  r.p = p;
  r.err_emp = r.err_stoch = r.err_theory = kNaN;
  r.theta_hat = r.eta_hat = r.gamma_hat = r.kappa_hat = kNaN;
  r.theta = r.eta = r.gamma = r.kappa = kNaN;
  return r;
}

void attach_theory(TrialRecord& r, const TheoryPoint& tp) {
  if (!tp.ok) return;
  r.err_theory = predicted_error(tp.state);
  r.theta = tp.state.theta;
  r.eta = tp.state.eta;
  r.gamma = tp.state.gamma;
  r.kappa = tp.state.kappa;
}

// Emits completed cells in index order so output never depends on timing.
class OrderedSink {
 public:
  OrderedSink(std::size_t cells, std::ostream* out) : slots_(cells), out_(out) {}

  void complete(std::size_t cell, std::vector<TrialRecord> rows) {
    std::lock_guard lock(mu_);
    slots_[cell] = std::move(rows);
    while (next_ < slots_.size() && slots_[next_]) {
      if (out_ != nullptr) {
        for (const auto& r : *slots_[next_]) write_trial_row(*out_, r);
        out_->flush();
      }
      ++next_;
    }
  }

  std::vector<TrialRecord> collect() {
    std::vector<TrialRecord> all;
    for (auto& s : slots_)
      if (s) all.insert(all.end(), s->begin(), s->end());
    return all;
  }

 private:
  std::mutex mu_;
  std::vector<std::optional<std::vector<TrialRecord>>> slots_;
  std::size_t next_ = 0;
  std::ostream* out_;
};

}  // namespace

void write_trial_header(std::ostream& out) {
  out << "trial,seed,loss,lambda,n,p,err_emp,err_stoch,err_theory,theta_hat,eta_hat,gamma_hat,"
         "kappa_hat,theta,eta,gamma,kappa,status,ms\n";
}

void write_trial_row(std::ostream& out, const TrialRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%d,%llu,%s,%.10g,%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,"
                "%.10g,%.10g,%s,%.10g\n",
                r.trial, static_cast<unsigned long long>(r.seed), r.loss.c_str(), r.lambda, r.n, r.p,
                r.err_emp, r.err_stoch, r.err_theory, r.theta_hat, r.eta_hat, r.gamma_hat,
                r.kappa_hat, r.theta, r.eta, r.gamma, r.kappa, r.status.c_str(), r.ms);
  out << buf;
}

std::vector<CurvePoint> aggregate(const std::vector<TrialRecord>& records) {
  std::vector<CurvePoint> points;
  std::vector<double> sum_sq;
  auto find = [&](const TrialRecord& r) -> std::size_t {
    for (std::size_t i = 0; i < points.size(); ++i)
      if (points[i].loss == r.loss && points[i].lambda == r.lambda && points[i].n == r.n) return i;
    CurvePoint pt;
    pt.loss = r.loss;
    pt.lambda = r.lambda;
    pt.n = r.n;
    pt.err_theory = r.err_theory;
    points.push_back(pt);
    sum_sq.push_back(0.0);
    return points.size() - 1;
  };
  for (const auto& r : records) {
    const std::size_t i = find(r);
    if (r.status != "ok") {
      ++points[i].failed;
      continue;
    }
    ++points[i].count;
    points[i].err_emp_mean += r.err_emp;
    points[i].err_stoch_mean += r.err_stoch;
    sum_sq[i] += r.err_emp * r.err_emp;
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& pt = points[i];
    if (pt.count == 0) {
      pt.err_emp_mean = pt.err_stoch_mean = pt.err_emp_se = kNaN;
      continue;
    }
    const double k = pt.count;
    pt.err_emp_mean /= k;
    pt.err_stoch_mean /= k;
    const double var = pt.count > 1 ? std::max(0.0, (sum_sq[i] - k * pt.err_emp_mean * pt.err_emp_mean) / (k - 1.0)) : 0.0;
    pt.err_emp_se = std::sqrt(var / k);
  }
  return points;
}

void write_curve_header(std::ostream& out) {
  out << "panel,loss,lambda,n,count,failed,err_emp_mean,err_emp_se,err_stoch_mean,err_theory\n";
}

void write_curve_row(std::ostream& out, const std::string& panel, const CurvePoint& pt) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%.10g,%d,%d,%d,%.10g,%.10g,%.10g,%.10g\n", panel.c_str(),
                pt.loss.c_str(), pt.lambda, pt.n, pt.count, pt.failed, pt.err_emp_mean,
                pt.err_emp_se, pt.err_stoch_mean, pt.err_theory);
  out << buf;
}

int resolve_threads(int requested, std::size_t tasks) {
  int t = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  if (tasks > 0 && static_cast<std::size_t>(t) > tasks) t = static_cast<int>(tasks);
  return t;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  const int workers = resolve_threads(threads, count);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* sink) {
  const MixtureModel model = build_model(config);
  const int p = model.dim();
  std::vector<Loss> losses;
  for (const auto& name : config.losses) losses.push_back(builtin_loss(name));

  ExperimentResult result;
  // Theory once per (n, lambda, loss), indexed in the same nesting as cells.
  for (int n : config.n_values) {
    for (double lambda : config.lambdas) {
      for (const Loss& loss : losses) {
        TheoryPoint tp;
        tp.loss = loss.name();
        tp.lambda = lambda;
        tp.n = n;
        try {
          tp.state = solve_fixed_point(model, loss, lambda, n);
          tp.ok = true;
          tp.status = "ok";
        } catch (const IllPosed& e) {
          tp.status = "ill_posed";
        } catch (const NumericalFailure& e) {
          tp.status = "numerical_failure";
        } catch (const InvalidArgument& e) {
          tp.status = "invalid";
        }
        result.theory.push_back(std::move(tp));
      }
    }
  }

  const std::size_t n_lambda = config.lambdas.size();
  const std::size_t n_loss = losses.size();
  const std::size_t reps = static_cast<std::size_t>(config.reps);
  const std::size_t cells = config.n_values.size() * n_lambda * reps;

  if (sink != nullptr) write_trial_header(*sink);
  OrderedSink ordered(cells, sink);
  auto run_cell = [&](std::size_t cell) {
    const std::size_t trial = cell % reps;
    const std::size_t li = (cell / reps) % n_lambda;
    const std::size_t ni = cell / (reps * n_lambda);
    const int n = config.n_values[ni];
    const double lambda = config.lambdas[li];
    const std::uint64_t seed = config.seed + trial;
    const Dataset data = sample_dataset(model, config.noise, n, seed);

    std::vector<TrialRecord> rows;
    std::vector<EmpiricalObservables> fitted_obs;
    std::vector<ErmSolution> fitted_sols;
    std::vector<std::string> fitted_names;
    for (std::size_t k = 0; k < n_loss; ++k) {
      const auto start = std::chrono::steady_clock::now();
      TrialRecord rec = blank_record(static_cast<int>(trial), seed, losses[k].name(), lambda, n, p);
      attach_theory(rec, result.theory[(ni * n_lambda + li) * n_loss + k]);
      try {
        ErmSolution sol = solve_erm(data, losses[k], lambda);
        rec.err_emp = classification_error(sol.beta, model);
        EmpiricalObservables obs = compute_observables(data, sol, losses[k]);
        rec.theta_hat = obs.theta_hat;
        rec.eta_hat = obs.eta_hat;
        rec.gamma_hat = obs.gamma_hat;
        rec.kappa_hat = obs.kappa_hat;
        rec.err_stoch = stochastic_error_prediction(obs, model, lambda);
        rec.status = "ok";
        fitted_obs.push_back(std::move(obs));
        fitted_sols.push_back(std::move(sol));
        fitted_names.push_back(losses[k].name());
      } catch (const IllPosed& e) {
        rec.status = status_of(e);
      } catch (const NumericalFailure& e) {
        rec.status = status_of(e);
      }
      if (config.timing)
        rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                     .count();
      rows.push_back(std::move(rec));
    }

    if (config.combine && n_loss >= 2) {
      std::string joined;
      for (std::size_t k = 0; k < n_loss; ++k) joined += (k ? "+" : "") + losses[k].name();
      TrialRecord rec = blank_record(static_cast<int>(trial), seed, joined, lambda, n, p);
      if (fitted_obs.size() == n_loss) {
        try {
          const CombinationResult comb = optimal_combination(fitted_obs, fitted_sols, model);
          rec.err_emp = classification_error(comb.combined_beta, model);
          rec.err_stoch = comb.predicted_error;
          rec.status = "ok";
        } catch (const IllPosed& e) {
          rec.status = status_of(e);
        } catch (const NumericalFailure& e) {
          rec.status = status_of(e);
        } catch (const InvalidArgument&) {
          rec.status = "mixed_bias";
        }
      } else {
        rec.status = "ill_posed";
      }
      rows.push_back(std::move(rec));
    }
    ordered.complete(cell, std::move(rows));
  };

  parallel_for(cells, config.threads, run_cell);
  result.records = ordered.collect();
  return result;
}

ExperimentResult run_and_write(const ExperimentConfig& config, std::ostream* fallback) {
  auto resolve = [&](const std::string& f) {
    std::filesystem::path path(f);
    if (path.is_relative() && !config.base_dir.empty()) path = config.base_dir / path;
    return path;
  };

  std::ofstream csv;
  if (!config.csv.empty()) {
    csv.open(resolve(config.csv));
    if (!csv) throw InvalidArgument("cannot write " + config.csv);
  }
  ExperimentResult res = run_experiment(config, config.csv.empty() ? fallback : &csv);

  if (!config.summary.empty()) {
    std::ofstream out(resolve(config.summary));
    if (!out) throw InvalidArgument("cannot write " + config.summary);
    out << "source,loss,lambda,n,p,theta,eta,gamma,kappa,err_pred,status\n";
    char buf[512];
    for (const auto& tp : res.theory) {
      const TheoryState& s = tp.state;
      std::snprintf(buf, sizeof buf, "theory,%s,%.10g,%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%s\n",
                    tp.loss.c_str(), tp.lambda, tp.n, config.p, tp.ok ? s.theta : kNaN,
                    tp.ok ? s.eta : kNaN, tp.ok ? s.gamma : kNaN, tp.ok ? s.kappa : kNaN,
                    tp.ok ? predicted_error(s) : kNaN, tp.status.c_str());
      out << buf;
    }
    for (const auto& r : res.records) {
      std::snprintf(buf, sizeof buf, "empirical,%s,%.10g,%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%s\n",
                    r.loss.c_str(), r.lambda, r.n, r.p, r.theta_hat, r.eta_hat, r.gamma_hat,
                    r.kappa_hat, r.err_stoch, r.status.c_str());
      out << buf;
    }
  }

  if (!config.svg.empty()) {
    // Mean curves per loss along whichever grid has more than one point.
    const bool along_lambda = config.lambdas.size() >= config.n_values.size();
    PlotPanel panel;
    panel.title = "classification error";
    panel.x_label = along_lambda ? "lambda" : "n";
    panel.y_label = "error";
    panel.log_x = along_lambda && config.lambdas.size() > 1 &&
                  *std::min_element(config.lambdas.begin(), config.lambdas.end()) > 0.0;
    std::map<std::string, std::pair<PlotSeries, PlotSeries>> curves;
    std::vector<std::string> order;
    for (const auto& pt : aggregate(res.records)) {
      if (!curves.count(pt.loss)) {
        order.push_back(pt.loss);
        curves[pt.loss] = {PlotSeries{pt.loss + " empirical", {}, {}, true},
                           PlotSeries{pt.loss + " theory", {}, {}, false}};
      }
      const double x = along_lambda ? pt.lambda : static_cast<double>(pt.n);
      auto& [emp, theo] = curves[pt.loss];
      emp.x.push_back(x);
      emp.y.push_back(pt.err_emp_mean);
      theo.x.push_back(x);
      theo.y.push_back(pt.err_theory);
    }
    for (const auto& name : order) {
      panel.series.push_back(curves[name].first);
      panel.series.push_back(curves[name].second);
    }
    write_svg(resolve(config.svg), {panel});
  }
  return res;
}

}  // namespace hdclass
