#include <benchmark/benchmark.h>

#include <vector>

#include "lseg/metrics/confusion.hpp"
#include "lseg/models/model.hpp"
#include "lseg/nn/conv.hpp"
#include "lseg/nn/kernels.hpp"
#include "lseg/rng.hpp"

namespace {

lseg::Tensor random_tensor(lseg::Shape shape, std::uint64_t seed) {
  lseg::Rng rng(seed);
  lseg::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
  return t;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<float> a(n * n, 0.5f), b(n * n, 0.25f), c(n * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0f);
    lseg::nn::kernels::gemm_nn(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->RangeMultiplier(2)->Range(32, 256);

void BM_Conv3x3(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  const auto size = static_cast<std::size_t>(state.range(1));
  lseg::Rng rng(1);
  lseg::nn::Conv2d<float> conv({channels, channels, 3, 1, 1, 1, true}, rng);
  const auto x = random_tensor({1, channels, size, size}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv.infer(x));
}
BENCHMARK(BM_Conv3x3)->Args({8, 128})->Args({16, 64})->Args({32, 32})->Unit(benchmark::kMillisecond);

void BM_Conv3x3Backward(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  lseg::Rng rng(1);
  lseg::nn::Conv2d<float> conv({channels, channels, 3, 1, 1, 1, true}, rng);
  const auto x = random_tensor({2, channels, 64, 64}, 2);
  const auto g = random_tensor({2, channels, 64, 64}, 3);
  for (auto _ : state) {
    conv.forward(x);
    benchmark::DoNotOptimize(conv.backward(g));
  }
}
BENCHMARK(BM_Conv3x3Backward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ModelForward(benchmark::State& state) {
  lseg::models::ModelSpec spec;
  spec.architecture = static_cast<lseg::models::Architecture>(state.range(0));
  spec.in_channels = 6;
  spec.base_width = 8;
  spec.depth = 3;
  lseg::Rng rng(7);
  const auto model = lseg::models::build_model<float>(spec, rng);
  const auto x = random_tensor({1, 6, 128, 128}, 11);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
  state.SetLabel(lseg::models::to_string(spec.architecture));
}
BENCHMARK(BM_ModelForward)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_Confusion(benchmark::State& state) {
  const std::size_t n = 128 * 128;
  lseg::Rng rng(5);
  std::vector<std::uint8_t> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = rng.uniform() < 0.2;
    b[i] = rng.uniform() < 0.2;
  }
  for (auto _ : state) benchmark::DoNotOptimize(lseg::metrics::confusion(a, b));
}
BENCHMARK(BM_Confusion);

}  // namespace

BENCHMARK_MAIN();
