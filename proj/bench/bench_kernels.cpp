// Serial against OpenMP run-time kernels, plus the Monte Carlo loop.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rtinv/kernels.hpp"
#include "rtinv/reference.hpp"

namespace {

struct Data {
  std::vector<double> M, g, off, y;
  explicit Data(std::size_t n) : M(n * n), g(n), off(n), y(n) {
    std::mt19937_64 rng(n);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : M) v = u(rng);
    for (auto& v : g) v = u(rng);
    for (auto& v : off) v = u(rng);
  }
};

void BM_Serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Data d(n);
  for (auto _ : state) {
    rtinv::kernels::affine_matvec_serial(d.M, d.g, d.off, d.y);
    benchmark::DoNotOptimize(d.y.data());
    benchmark::ClobberMemory();
  }
  state.counters["FLOPs"] = benchmark::Counter(2.0 * static_cast<double>(n * n),
                                               benchmark::Counter::kIsIterationInvariantRate);
}

void BM_OpenMP(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Data d(n);
  for (auto _ : state) {
    rtinv::kernels::affine_matvec_omp(d.M, d.g, d.off, d.y);
    benchmark::DoNotOptimize(d.y.data());
    benchmark::ClobberMemory();
  }
  state.counters["FLOPs"] = benchmark::Counter(2.0 * static_cast<double>(n * n),
                                               benchmark::Counter::kIsIterationInvariantRate);
}

void BM_MonteCarloTestE(benchmark::State& state) {
  const auto tp = rtinv::reference::test_problem("testE");
  for (auto _ : state) {
    auto r = rtinv::reference::monte_carlo(tp, 21, 9, 0.01, static_cast<std::size_t>(state.range(0)), 1);
    benchmark::DoNotOptimize(r.mean.data());
  }
}

}  // namespace

BENCHMARK(BM_Serial)->RangeMultiplier(2)->Range(16, 2048);
BENCHMARK(BM_OpenMP)->RangeMultiplier(2)->Range(16, 2048);
BENCHMARK(BM_MonteCarloTestE)->Arg(1000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
