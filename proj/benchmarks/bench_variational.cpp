#include <benchmark/benchmark.h>

#include "pam/variational.hpp"

using namespace pam;

static void BM_Chi(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(chi_d(d, 1.0, 4.0, d == 1 ? 10 : 6));
}
BENCHMARK(BM_Chi)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_ChiTilde(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(chi_tilde_d(d, 1.0, 4.0, d == 1 ? 10 : 6));
}
BENCHMARK(BM_ChiTilde)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
