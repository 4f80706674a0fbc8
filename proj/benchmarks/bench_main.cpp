#include <benchmark/benchmark.h>

#include <cmath>

#include "hdclass/config.hpp"
#include "hdclass/erm_solver.hpp"
#include "hdclass/losses.hpp"
#include "hdclass/observables.hpp"
#include "hdclass/theory.hpp"

using namespace hdclass;

namespace {

void prox_sweep(benchmark::State& state, Loss loss) {
  double acc = 0.0;
  for (auto _ : state) {
    for (int k = 0; k < 1000; ++k) acc += prox(loss, 1.5, -10.0 + 0.02 * k);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK_CAPTURE(prox_sweep, logistic, Loss::logistic());
BENCHMARK_CAPTURE(prox_sweep, exponential, Loss::exponential());
BENCHMARK_CAPTURE(prox_sweep, square_root, Loss::square_root());

void fixed_point(benchmark::State& state) {
  const MixtureModel model = build_model("ones:sqrt(2/p)", "identity", 300);
  const double lambda = std::pow(2.0, static_cast<double>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_fixed_point(model, Loss::logistic(), lambda, 900).theta);
}
BENCHMARK(fixed_point)->Arg(-6)->Arg(-2)->Arg(2)->Arg(10)->Unit(benchmark::kMillisecond);

void fixed_point_anisotropic(benchmark::State& state) {
  const MixtureModel model = build_model("block:sqrt(2/p),2*sqrt(2/p)", "toeplitz:0.5", 500);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_fixed_point(model, Loss::exponential(), 0.1, 1500).theta);
}
BENCHMARK(fixed_point_anisotropic)->Unit(benchmark::kMillisecond);

void erm_newton(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const MixtureModel model = build_model("ones:sqrt(2/p)", "identity", p);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 3 * p, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(solve_erm(data, Loss::logistic(), 0.25).beta.data());
}
BENCHMARK(erm_newton)->Arg(100)->Arg(300)->Arg(600)->Unit(benchmark::kMillisecond);

void observables(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  const MixtureModel model = build_model("ones:sqrt(2/p)", "identity", p);
  const Dataset data = sample_dataset(model, NoiseLaw::gaussian, 3 * p, 1);
  const ErmSolution sol = solve_erm(data, Loss::logistic(), 0.25);
  for (auto _ : state)
    benchmark::DoNotOptimize(compute_observables(data, sol, Loss::logistic()).kappa_hat);
}
BENCHMARK(observables)->Arg(100)->Arg(300)->Arg(600)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
