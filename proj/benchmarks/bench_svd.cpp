#include <benchmark/benchmark.h>

#include "gabornoise/dataset.hpp"
#include "gabornoise/rng.hpp"
#include "gabornoise/svd_uap.hpp"

using namespace gabornoise;

namespace {

void BM_PowerMethodDense(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SplitMix64 rng(4);
  std::vector<double> a(n * n);
  for (double& x : a) x = rng.symmetric();
  const auto op = dense_operator(n, n, a);
  SingularConfig cfg;
  cfg.max_iter = 100;
  for (auto _ : state) benchmark::DoNotOptimize(power_method(op, cfg));
}
BENCHMARK(BM_PowerMethodDense)->Arg(12)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_JacobianProducts(benchmark::State& state) {
  GaborBankClassifier model(1);
  const auto x = synthetic_dataset(1, model.descriptor().input_shape(), 3).images[0];
  const auto j = layer_jacobian(model, static_cast<Layer>(state.range(0)), x);
  SplitMix64 rng(5);
  std::vector<double> v(j.input_dim);
  for (double& e : v) e = rng.symmetric();
  for (auto _ : state) benchmark::DoNotOptimize(j.backward(j.forward(v)));
  state.SetLabel(std::string(to_string(static_cast<Layer>(state.range(0)))));
}
BENCHMARK(BM_JacobianProducts)->DenseRange(0, 2)->Unit(benchmark::kMicrosecond);

void BM_SingularUap(benchmark::State& state) {
  GaborBankClassifier model(1);
  const auto batch = synthetic_dataset(8, model.descriptor().input_shape(), 3).images;
  SingularConfig cfg;
  cfg.max_iter = 10;
  for (auto _ : state) benchmark::DoNotOptimize(singular_uap(model, Layer::post_pool, batch, cfg));
}
BENCHMARK(BM_SingularUap)->Unit(benchmark::kMillisecond);

}  // namespace
