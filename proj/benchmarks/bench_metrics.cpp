#include <benchmark/benchmark.h>

#include "gabornoise/dataset.hpp"
#include "gabornoise/metrics.hpp"
#include "gabornoise/reference_model.hpp"
#include "gabornoise/rng.hpp"

using namespace gabornoise;

namespace {

void BM_UniversalMetrics(benchmark::State& state) {
  GaborBankClassifier model(3);
  const auto images = synthetic_dataset(static_cast<std::size_t>(state.range(0)), ImageShape{32, 32, 3}, 2).images;
  const auto s = random_uniform_perturbation(32, 32, 12.0, 5);
  const auto clean = predict_all(model, images);
  for (auto _ : state) benchmark::DoNotOptimize(universal_metrics(model, images, clean, s));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_UniversalMetrics)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_Quartiles(benchmark::State& state) {
  SplitMix64 rng(1);
  std::vector<double> v(static_cast<std::size_t>(state.range(0)));
  for (double& x : v) x = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(quartiles(v));
}
BENCHMARK(BM_Quartiles)->Arg(1000)->Arg(100000);

void BM_PearsonMatrix(benchmark::State& state) {
  SplitMix64 rng(2);
  std::vector<NamedColumn> cols(7);
  for (auto& c : cols) {
    c.values.resize(static_cast<std::size_t>(state.range(0)));
    for (double& x : c.values) x = rng.uniform();
  }
  for (auto _ : state) benchmark::DoNotOptimize(pearson_correlation_matrix(cols));
}
BENCHMARK(BM_PearsonMatrix)->Arg(1000);

void BM_PairwiseSum(benchmark::State& state) {
  SplitMix64 rng(3);
  std::vector<double> v(static_cast<std::size_t>(state.range(0)));
  for (double& x : v) x = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_sum(v));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PairwiseSum)->Arg(5000)->Arg(1000000);

}  // namespace
