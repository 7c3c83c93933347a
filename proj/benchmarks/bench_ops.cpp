#include <benchmark/benchmark.h>

#include <random>

#include "deformreg/losses.hpp"
#include "deformreg/nd/ops.hpp"
#include "deformreg/warp.hpp"

using namespace deformreg;

namespace {

nd::Tensor uniform(nd::Shape shape, std::uint64_t seed, float lo, float hi, bool grad = false) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(static_cast<std::size_t>(nd::shape_numel(shape)));
  for (auto& x : v) x = u(rng);
  return nd::Tensor::from_data(std::move(shape), std::move(v), grad);
}

void BM_Conv2dForward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int ch = static_cast<int>(state.range(1));
  const auto x = uniform({1, ch, size, size}, 1, -1, 1);
  const auto w = uniform({ch, ch, 3, 3}, 2, -0.1f, 0.1f);
  const auto b = nd::Tensor::zeros({ch});
  nd::Tape tape(false);
  for (auto _ : state) benchmark::DoNotOptimize(nd::conv2d(tape, x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * 2LL * size * size * ch * ch * 9);
}
BENCHMARK(BM_Conv2dForward)->Args({64, 16})->Args({32, 32})->Args({128, 16})->Unit(benchmark::kMicrosecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const int ch = static_cast<int>(state.range(1));
  const auto x = uniform({1, ch, size, size}, 1, -1, 1, true);
  const auto w = uniform({ch, ch, 3, 3}, 2, -0.1f, 0.1f, true);
  const auto b = nd::Tensor::zeros({ch}, true);
  for (auto _ : state) {
    nd::Tape tape;
    tape.backward(nd::reduce_sum(tape, nd::conv2d(tape, x, w, b, 1, 1)));
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({64, 16})->Args({32, 32})->Unit(benchmark::kMicrosecond);

void BM_BilinearWarp(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto m = uniform({1, 1, size, size}, 3, 0, 1);
  const auto f = uniform({1, 2, size, size}, 4, -4, 4);
  nd::Tape tape(false);
  for (auto _ : state) benchmark::DoNotOptimize(warp::bilinear_warp(tape, m, f));
  state.SetItemsProcessed(state.iterations() * size * size);
}
BENCHMARK(BM_BilinearWarp)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_WarpAndLossBackward(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto m = uniform({1, 1, size, size}, 3, 0, 1);
  const auto fixed = uniform({1, 1, size, size}, 5, 0, 1);
  const auto f = uniform({1, 2, size, size}, 4, -4, 4, true);
  const auto cfg = losses::LossConfig::defaults(1);
  for (auto _ : state) {
    nd::Tape tape;
    const std::vector<losses::ScaleTerms> terms{{warp::bilinear_warp(tape, m, f), fixed, f, {}, {}}};
    tape.backward(losses::total_loss(tape, terms, cfg).total);
  }
}
BENCHMARK(BM_WarpAndLossBackward)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_InvertField(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  DeformationField u(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      u.set(y, x, static_cast<float>(2 * std::sin(0.1 * y)), static_cast<float>(2 * std::cos(0.08 * x)));
  for (auto _ : state) benchmark::DoNotOptimize(warp::invert_field(u));
}
BENCHMARK(BM_InvertField)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace
