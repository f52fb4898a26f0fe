#include <benchmark/benchmark.h>

#include "torusdm/density.hpp"
#include "torusdm/normalization.hpp"
#include "torusdm/reference.hpp"
#include "torusdm/spectral.hpp"

using namespace torusdm;

namespace {

NormalizedOperator make_op(int M, double eps) {
  auto model = DensityModel::figure1();
  auto Kp = std::make_shared<const KernelMatrix>(
      build_kernel_matrix(model.sample(M, 1), eps));
  return assemble_P(Kp, assa(*Kp, eps, default_assa_tau(eps, M)).weights);
}

}  // namespace

static void BM_EigensolveTopk(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const auto op = make_op(M, 0.02);
  for (auto _ : state) {
    auto sr = eigensolve(op, 6);
    benchmark::DoNotOptimize(sr.mu.data());
  }
}
BENCHMARK(BM_EigensolveTopk)->Arg(500)->Arg(1000)->Arg(2000)->Arg(4000)
    ->Unit(benchmark::kMillisecond);

static void BM_ContinuumOperator(benchmark::State& state) {
  auto model = DensityModel::figure1();
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto op = continuum_operator(model.axis(0), 0.01, n, NormSpec::sinkhorn());
    benchmark::DoNotOptimize(op.P.data());
  }
}
BENCHMARK(BM_ContinuumOperator)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

static void BM_GeneratorReference(benchmark::State& state) {
  auto model = DensityModel::figure1();
  const int n_modes = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto ref = generator_reference(model.axis(0), 3, GeneratorKind::Langevin,
                                   0.5, n_modes);
    benchmark::DoNotOptimize(ref.clusters.data());
  }
}
BENCHMARK(BM_GeneratorReference)->Arg(513)->Arg(1001)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
