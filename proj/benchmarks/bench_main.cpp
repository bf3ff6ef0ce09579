#include <benchmark/benchmark.h>

#include "attnvgg/attention.hpp"
#include "attnvgg/layers.hpp"
#include "attnvgg/model.hpp"
#include "attnvgg/rng.hpp"
#include "attnvgg/tensor.hpp"

using namespace attnvgg;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

// Args: spatial size, channels in/out.
void BM_Conv2dForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  Rng rng(1);
  const Tensor x = random_tensor({n, n, c}, rng);
  const Tensor w = random_tensor({3, 3, c, c}, rng);
  const Tensor b = random_tensor({c}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_forward(x, w, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * c * c * 9));
}
BENCHMARK(BM_Conv2dForward)->Args({32, 8})->Args({32, 32})->Args({16, 64});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  Rng rng(2);
  const Tensor x = random_tensor({n, n, c}, rng);
  const Tensor w = random_tensor({3, 3, c, c}, rng);
  const Tensor up = random_tensor({n, n, c}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, w, up));
}
BENCHMARK(BM_Conv2dBackward)->Args({32, 8})->Args({32, 32});

void BM_BilinearResize(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const Tensor x = random_tensor({n, n, 1}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(bilinear_resize(x, 128, 128));
}
BENCHMARK(BM_BilinearResize)->Arg(64)->Arg(256)->Arg(512);

void BM_AttentionForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  const AttentionGateParams params = AttentionGateParams::create(c, c, c, rng);
  const Tensor x = random_tensor({16, 16, c}, rng);
  const Tensor g = random_tensor({4, 4, c}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(attention_forward(x, g, params));
}
BENCHMARK(BM_AttentionForward)->Arg(16)->Arg(128);

void BM_VggTinyForward(benchmark::State& state) {
  const Model model = Model::build(ArchitectureSpec::vgg_tiny(state.range(0) != 0), 5);
  Rng rng(5);
  const Tensor image = random_tensor({32, 32, 1}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(image));
}
BENCHMARK(BM_VggTinyForward)->Arg(0)->Arg(1);

void BM_VggTinyTrainStep(benchmark::State& state) {
  Model model = Model::build(ArchitectureSpec::vgg_tiny(state.range(0) != 0), 6);
  Rng rng(6);
  const Tensor image = random_tensor({32, 32, 1}, rng);
  ForwardOptions options;
  options.training = true;
  options.rng = &rng;
  for (auto _ : state) {
    ForwardResult r = model.forward(image, options);
    model.backward(r.cache, r.prediction - 1.0);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_VggTinyTrainStep)->Arg(0)->Arg(1);

}  // namespace

BENCHMARK_MAIN();
