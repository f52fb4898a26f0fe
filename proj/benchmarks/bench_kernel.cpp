#include <benchmark/benchmark.h>

#include "torusdm/density.hpp"
#include "torusdm/kernel.hpp"
#include "torusdm/torus.hpp"

using namespace torusdm;

static void BM_KernelAssembly(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  auto model = DensityModel::figure1();
  const auto sample = model.sample(M, 1);
  for (auto _ : state) {
    auto K = build_kernel_matrix(sample, 0.01);
    benchmark::DoNotOptimize(K.entries.data());
  }
  state.SetItemsProcessed(state.iterations() * M * int64_t(M));
}
BENCHMARK(BM_KernelAssembly)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_KernelAssembly3D(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  auto model = DensityModel::figure2();
  const auto sample = model.sample(M, 1);
  for (auto _ : state) {
    auto K = build_kernel_matrix(sample, 0.05);
    benchmark::DoNotOptimize(K.entries.data());
  }
  state.SetItemsProcessed(state.iterations() * M * int64_t(M));
}
BENCHMARK(BM_KernelAssembly3D)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_PeriodizedGaussian(benchmark::State& state) {
  const TorusDomain dom(1, 1.0);
  const int J = static_cast<int>(state.range(0));
  PeriodicDisplacement r;
  r.components.resize(1);
  r.components[0] = 0.37;
  for (auto _ : state)
    benchmark::DoNotOptimize(periodized_gaussian(dom, 0.3, r, J));
}
BENCHMARK(BM_PeriodizedGaussian)->Arg(0)->Arg(2)->Arg(6);

BENCHMARK_MAIN();
