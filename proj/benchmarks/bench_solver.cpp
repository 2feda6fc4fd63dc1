#include <benchmark/benchmark.h>

#include "pam/potentials.hpp"
#include "pam/solver.hpp"

using namespace pam;

static void BM_Evolve(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const Box box(d, static_cast<int>(state.range(1)));
  const Field xi = sample_field(PotentialSpec::double_exponential(1.0), box, 1);
  Field u0(box);
  u0[box.center_index()] = 1.0;
  EvolutionConfig cfg;
  cfg.t_end = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(evolve(xi, u0, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(box.size()));
}
BENCHMARK(BM_Evolve)->Args({1, 500})->Args({2, 40})->Args({3, 12})->Unit(benchmark::kMillisecond);

static void BM_FeynmanKac(benchmark::State& state) {
  const Box box(1, 30);
  const Field xi = sample_field(PotentialSpec::double_exponential(1.0), box, 2);
  WalkConfig cfg;
  cfg.paths = static_cast<std::size_t>(state.range(0));
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(feynman_kac(xi, 2.0, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FeynmanKac)->Arg(10000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
