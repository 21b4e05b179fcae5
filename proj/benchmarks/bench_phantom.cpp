#include <benchmark/benchmark.h>

#include "isilab/volume.hpp"

static void bm_generate_phantom(benchmark::State& state) {
  isilab::PhantomConfig config;
  config.shape = {state.range(0), state.range(0), state.range(0)};
  config.seed = 7;
  std::uint64_t subject = 0;
  for (auto _ : state) {
    auto v = isilab::generate_phantom(config, subject++);
    benchmark::DoNotOptimize(v.data.data());
  }
}
BENCHMARK(bm_generate_phantom)->Arg(32)->Arg(64);

static void bm_preprocess(benchmark::State& state) {
  isilab::PhantomConfig config;
  config.shape = {64, 64, 64};
  config.seed = 7;
  const auto v = isilab::generate_phantom(config, 1);
  for (auto _ : state) {
    auto scaled = isilab::scale_intensity_percentiles(v, 5.0, 95.0, -1.0, 1.0);
    auto cropped = isilab::crop_foreground(scaled, -1.0 + 1e-6);
    benchmark::DoNotOptimize(cropped.data.data());
  }
}
BENCHMARK(bm_preprocess);

BENCHMARK_MAIN();
