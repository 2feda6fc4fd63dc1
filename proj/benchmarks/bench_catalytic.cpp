#include <benchmark/benchmark.h>

#include "pam/catalytic.hpp"

using namespace pam;

static void BM_CatalystWalkers(benchmark::State& state) {
  CatalystParams p;
  p.radius = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_catalysts(p, {1.0, 2.0}, 4));
}
BENCHMARK(BM_CatalystWalkers)->Arg(64)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_EvolveCatalytic(benchmark::State& state) {
  CatalystParams p;
  p.radius = 64;
  CatalyticEvolutionConfig cfg;
  cfg.t_grid = {1.0, 2.0};
  for (auto _ : state) benchmark::DoNotOptimize(evolve_catalytic(p, cfg, 5));
}
BENCHMARK(BM_EvolveCatalytic)->Unit(benchmark::kMillisecond);

static void BM_FkMoment(benchmark::State& state) {
  CatalystParams p;
  p.radius = 64;
  for (auto _ : state) benchmark::DoNotOptimize(fk_moment(p, 1.0, 2, {1.0, 2.0}, 200, 6, 1));
}
BENCHMARK(BM_FkMoment)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
