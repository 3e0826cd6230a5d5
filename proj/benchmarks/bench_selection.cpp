#include <benchmark/benchmark.h>

#include <algorithm>
#include <numeric>

#include "qrk/corruption.hpp"
#include "qrk/linalg.hpp"
#include "qrk/solvers.hpp"
#include "qrk/spectral.hpp"

namespace {

qrk::Vector random_residuals(std::size_t m) {
  qrk::Stream rng(1);
  qrk::Vector r(m);
  for (double& v : r) v = std::abs(rng.normal());
  return r;
}

void BM_QuantileSelect(benchmark::State& state) {
  const auto r = random_residuals(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(qrk::quantile_select(r, 0.7));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_QuantileSelect)->RangeMultiplier(4)->Range(64, 65536)->Complexity();

// Baseline: the same selection by a full sort.
void BM_FullSortSelect(benchmark::State& state) {
  const auto r = random_residuals(static_cast<std::size_t>(state.range(0)));
  std::vector<std::size_t> idx(r.size());
  for (auto _ : state) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return r[i] < r[j] || (r[i] == r[j] && i < j); });
    idx.resize(qrk::floor_count(0.7, r.size()));
    std::sort(idx.begin(), idx.end());
    benchmark::DoNotOptimize(idx.data());
    idx.resize(r.size());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FullSortSelect)->RangeMultiplier(4)->Range(64, 65536)->Complexity();

// One solver step per iteration of the benchmark loop, m x 50 systems.
void solver_steps(benchmark::State& state, qrk::Strategy strategy) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto system = qrk::generate_gaussian_system(m, 50, 3);
  qrk::SolverConfig c;
  c.strategy = strategy;
  c.q = 0.7;
  c.t = 100;
  c.max_iters = 1000;
  for (auto _ : state) benchmark::DoNotOptimize(qrk::run_solver(system.a, system.b_observed, c));
  state.SetItemsProcessed(state.iterations() * 1000);
}
void BM_QuantileSteps(benchmark::State& s) { solver_steps(s, qrk::Strategy::Quantile); }
void BM_SampledQuantileSteps(benchmark::State& s) { solver_steps(s, qrk::Strategy::SampledQuantile); }
void BM_UniformSteps(benchmark::State& s) { solver_steps(s, qrk::Strategy::Uniform); }
BENCHMARK(BM_QuantileSteps)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampledQuantileSteps)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_UniformSteps)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_SigmaMin(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto system = qrk::generate_gaussian_system(10 * n, n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(qrk::sigma_min(system.a.matrix()));
}
BENCHMARK(BM_SigmaMin)->Arg(10)->Arg(50)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_ExactSubsetMin(benchmark::State& state) {
  const auto system = qrk::generate_gaussian_system(14, 2, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qrk::spectral::sigma_subset_extremal(system.a.matrix(), 10, qrk::spectral::Extremum::Min,
                                                                  qrk::spectral::SubsetMethod::exact()));
  }
}
BENCHMARK(BM_ExactSubsetMin)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
