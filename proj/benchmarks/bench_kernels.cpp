#include <benchmark/benchmark.h>

#include "tmfm/estimate.hpp"
#include "tmfm/simulate.hpp"

namespace {

tmfm::SimulatedDataset data(tmfm::Index p, tmfm::Index T) {
  tmfm::DgpSpec spec;
  spec.p1 = p;
  spec.p2 = p;
  spec.T = T;
  spec.seed = 1;
  return tmfm::simulate_dataset(spec);
}

void BM_MHatAll(benchmark::State& state) {
  const auto d = data(state.range(0), state.range(1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(tmfm::m_hat_all(d.x, d.z, -0.5, 0.5, 2));
  }
}
BENCHMARK(BM_MHatAll)->Args({10, 600})->Args({20, 1200})->Args({40, 2400})->Unit(benchmark::kMillisecond);

// Kernels over the whole threshold grid: incremental sweep.
void BM_Sweep(benchmark::State& state) {
  const auto d = data(state.range(0), state.range(1));
  const auto grid = tmfm::threshold_grid(d.z, tmfm::quantile(d.z, 0.25), tmfm::quantile(d.z, 0.75));
  for (auto _ : state) {
    double acc = 0.0;
    tmfm::sweep_kernels(d.x, d.z, grid, 2, [&](std::size_t, double, const tmfm::Quad<Eigen::MatrixXd>& k) {
      acc += k.items[0](0, 0);
    });
    benchmark::DoNotOptimize(acc);
  }
  state.counters["grid"] = static_cast<double>(grid.size());
}
BENCHMARK(BM_Sweep)->Args({10, 600})->Args({20, 1200})->Unit(benchmark::kMillisecond);

// Same grid recomputed point by point.
void BM_PerPoint(benchmark::State& state) {
  const auto d = data(state.range(0), state.range(1));
  const auto grid = tmfm::threshold_grid(d.z, tmfm::quantile(d.z, 0.25), tmfm::quantile(d.z, 0.75));
  for (auto _ : state) {
    double acc = 0.0;
    for (double r : grid) acc += tmfm::m_hat_all(d.x, d.z, r, r, 2).items[0].m(0, 0);
    benchmark::DoNotOptimize(acc);
  }
  state.counters["grid"] = static_cast<double>(grid.size());
}
BENCHMARK(BM_PerPoint)->Args({10, 600})->Unit(benchmark::kMillisecond);

void BM_SymEigen(benchmark::State& state) {
  const auto d = data(state.range(0), 400);
  const auto m = tmfm::m_hat_all(d.x, d.z, 0.0, 0.0, 2).items[0].m;
  for (auto _ : state) benchmark::DoNotOptimize(tmfm::sym_eigen(m));
}
BENCHMARK(BM_SymEigen)->Arg(20)->Arg(40)->Arg(80);

}  // namespace
