#include <benchmark/benchmark.h>

#include "torusdm/density.hpp"
#include "torusdm/kernel.hpp"
#include "torusdm/normalization.hpp"

using namespace torusdm;

namespace {

KernelMatrix make_kernel(int M, double eps) {
  auto model = DensityModel::figure1();
  return build_kernel_matrix(model.sample(M, 1), eps);
}

}  // namespace

static void BM_Assa(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const double eps = 0.02;
  const auto K = make_kernel(M, eps);
  for (auto _ : state) {
    auto res = assa(K, eps, default_assa_tau(eps, M));
    benchmark::DoNotOptimize(res.weights.u.data());
  }
}
BENCHMARK(BM_Assa)->Arg(500)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

static void BM_PlainSinkhorn(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const double eps = 0.02;
  const auto K = make_kernel(M, eps);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(M);
  for (auto _ : state) {
    auto res = sinkhorn_plain(K, ones, 1e-13);
    benchmark::DoNotOptimize(res.weights.u.data());
  }
}
BENCHMARK(BM_PlainSinkhorn)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_StandardWeights(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const auto K = make_kernel(M, 0.02);
  for (auto _ : state) {
    auto w = standard_weights(K, 0.5);
    benchmark::DoNotOptimize(w.u.data());
  }
}
BENCHMARK(BM_StandardWeights)->Arg(1000)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
