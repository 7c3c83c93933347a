#include <benchmark/benchmark.h>

#include "deformreg/engine.hpp"
#include "deformreg/synth.hpp"

using namespace deformreg;

namespace {

ImagePair make_pair(int size) {
  synth::SynthSpec spec;
  spec.height = spec.width = size;
  spec.max_displacement = size / 16.0;
  spec.pair_count = 1;
  return synth::generate_pair(spec, 0);
}

void BM_Register(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto pair = make_pair(size);
  const auto model = regnet::init_model(regnet::ArchConfig{.height = size, .width = size}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(engine::register_pair(model, pair.fixed, pair.moving));
}
BENCHMARK(BM_Register)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Optimize(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto pair = make_pair(size);
  const engine::OptimizeConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(engine::optimize_field(pair.fixed, pair.moving, cfg));
}
BENCHMARK(BM_Optimize)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond)->Iterations(1);

void BM_TrainEpoch(benchmark::State& state) {
  synth::SynthSpec spec;
  spec.pair_count = 16;
  const auto data = synth::generate_dataset(spec);
  auto cfg = engine::TrainConfig::defaults(engine::TrainMode::Unsupervised, 4);
  cfg.halve_after_epochs = 1;
  cfg.extra_epochs = 0;
  for (auto _ : state) {
    state.PauseTiming();
    auto model = regnet::init_model(regnet::ArchConfig{}, 1);
    state.ResumeTiming();
    benchmark::DoNotOptimize(engine::train(model, data, cfg));
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
