#include <benchmark/benchmark.h>

#include "gabornoise/noise.hpp"
#include "gabornoise/perturbation.hpp"

using namespace gabornoise;

namespace {

AnisotropicNoiseParams params() {
  AnisotropicNoiseParams p;
  p.theta = {4.0, 0.8, 6.0};
  p.seed = 9;
  return p;
}

void BM_ScatterPoints(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(scatter_points(n, n, kDefaultKernelSize, 1.0, 3));
}
BENCHMARK(BM_ScatterPoints)->Arg(32)->Arg(224);

void BM_Synthesis(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const double density = static_cast<double>(state.range(1));
  const auto p = params();
  const PointLattice lattice = scatter_points(n, n, p.kernel_size, density, 3);
  for (auto _ : state) benchmark::DoNotOptimize(synth_gabor_noise(p, lattice, n, n));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lattice.size()));
}
BENCHMARK(BM_Synthesis)->Args({32, 1})->Args({224, 1})->Args({224, 4})->Unit(benchmark::kMillisecond);

void BM_GaborPerturbation(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(gabor_perturbation(params(), n, n, 12.0, PerturbationMode::sign));
}
BENCHMARK(BM_GaborPerturbation)->Arg(32)->Arg(224)->Unit(benchmark::kMillisecond);

void BM_RandomBaseline(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(random_uniform_perturbation(n, n, 12.0, 1));
}
BENCHMARK(BM_RandomBaseline)->Arg(32)->Arg(224);

}  // namespace
