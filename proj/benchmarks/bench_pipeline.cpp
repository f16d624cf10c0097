#include <benchmark/benchmark.h>

#include "tmfm/estimate.hpp"
#include "tmfm/harness.hpp"

namespace {

void BM_Fit(benchmark::State& state) {
  tmfm::DgpSpec spec;
  spec.p1 = state.range(0);
  spec.p2 = state.range(0);
  spec.T = state.range(1);
  spec.seed = 2;
  const auto d = tmfm::simulate_dataset(spec);
  for (auto _ : state) benchmark::DoNotOptimize(tmfm::fit(d.x, d.z, tmfm::EstimationConfig{}));
}
BENCHMARK(BM_Fit)->Args({10, 600})->Args({20, 1200})->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  tmfm::DgpSpec spec;
  spec.p1 = state.range(0);
  spec.p2 = state.range(0);
  spec.T = state.range(1);
  for (auto _ : state) benchmark::DoNotOptimize(tmfm::simulate_dataset(spec));
}
BENCHMARK(BM_Simulate)->Args({20, 1200})->Args({40, 2400})->Unit(benchmark::kMillisecond);

// One Monte Carlo replicate with four factor-count variants sharing a sweep.
void BM_Replicate(benchmark::State& state) {
  tmfm::ExperimentGrid grid;
  grid.settings = {{"setting 1", grid.base}};
  grid.k_variants = {tmfm::KVariant::estimated(), tmfm::KVariant::fixed({3, 3}), tmfm::KVariant::fixed({4, 4}),
                     tmfm::KVariant::fixed({2, 2})};
  int rep = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tmfm::run_replicate(grid, 0, rep++));
}
BENCHMARK(BM_Replicate)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
