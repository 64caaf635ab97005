#include <benchmark/benchmark.h>

#include "gabornoise/dataset.hpp"
#include "gabornoise/reference_model.hpp"

using namespace gabornoise;

namespace {

void BM_ModelConstruct(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(GaborBankClassifier(7));
}
BENCHMARK(BM_ModelConstruct);

void BM_ModelPredictBatch(benchmark::State& state) {
  GaborBankClassifier model(7);
  const auto images = synthetic_dataset(static_cast<std::size_t>(state.range(0)), model.descriptor().input_shape(), 1).images;
  for (auto _ : state) benchmark::DoNotOptimize(model.predict_batch(images));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ModelPredictBatch)->Arg(1)->Arg(64)->Unit(benchmark::kMicrosecond);

}  // namespace
