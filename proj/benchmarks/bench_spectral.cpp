#include <benchmark/benchmark.h>

#include "pam/green.hpp"
#include "pam/potentials.hpp"
#include "pam/spectral.hpp"

using namespace pam;

static void BM_PrincipalEigen(benchmark::State& state) {
  const auto method = static_cast<EigenMethod>(state.range(0));
  const Box box(2, static_cast<int>(state.range(1)));
  const Field V = sample_field(PotentialSpec::double_exponential(2.0), box, 3);
  EigenOptions opts;
  opts.method = method;
  for (auto _ : state) benchmark::DoNotOptimize(principal_eigen(V, 1.0, opts));
  state.SetLabel(std::string(to_string(method)));
}
BENCHMARK(BM_PrincipalEigen)
    ->Args({static_cast<int>(EigenMethod::krylov), 30})
    ->Args({static_cast<int>(EigenMethod::power), 30})
    ->Args({static_cast<int>(EigenMethod::dense), 12})
    ->Unit(benchmark::kMillisecond);

static void BM_MuOfR(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mu_of_r(5.0, d));
}
BENCHMARK(BM_MuOfR)->Arg(1)->Arg(3)->Unit(benchmark::kMicrosecond);

static void BM_GreenOrigin(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(green_function_origin(3));
}
BENCHMARK(BM_GreenOrigin)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
