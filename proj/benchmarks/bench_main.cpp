#include <benchmark/benchmark.h>

#include "hnbr/model.hpp"
#include "hnbr/simulate.hpp"
#include "hnbr/solver.hpp"
#include "hnbr/tuning.hpp"

namespace {

hnbr::Dataset make_data(hnbr::Index n, hnbr::Index p) {
  hnbr::Rng rng = hnbr::make_stream(17, 0);
  return hnbr::generate_dataset(n, hnbr::SimulationConfig::default_truth(p), 0.0, rng);
}

void BM_LossAndGradient(benchmark::State& state) {
  const auto d = make_data(state.range(0), state.range(1));
  const auto theta = hnbr::SimulationConfig::default_truth(d.p());
  for (auto _ : state) {
    benchmark::DoNotOptimize(hnbr::evaluate(d, theta, {}, true));
  }
  state.SetItemsProcessed(state.iterations() * d.n());
}
BENCHMARK(BM_LossAndGradient)->Args({400, 3})->Args({400, 100})->Args({4000, 100});

void BM_SingleFit(benchmark::State& state) {
  const auto d = make_data(state.range(0), state.range(1));
  const auto [m1, m2] = hnbr::lambda_max(d);
  hnbr::PenaltyConfig cfg;
  cfg.lambda1 = 0.05 * m1;
  cfg.lambda2 = 0.05 * m2;
  cfg.extra_starts = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hnbr::fit(d, cfg));
  }
}
BENCHMARK(BM_SingleFit)->Args({400, 3})->Args({400, 100})->Unit(benchmark::kMillisecond);

void BM_GridSearch(benchmark::State& state) {
  const auto d = make_data(400, state.range(0));
  const auto grid = hnbr::default_grid(d.n(), d.p(), d);
  hnbr::PenaltyConfig cfg;
  cfg.extra_starts = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(hnbr::grid_search(d, grid, cfg));
  }
  state.counters["grid_points"] = static_cast<double>(grid.pairs.size());
}
BENCHMARK(BM_GridSearch)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
