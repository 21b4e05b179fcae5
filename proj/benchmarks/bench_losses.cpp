#include <benchmark/benchmark.h>

#include <array>
#include <vector>

#include "isilab/losses.hpp"
#include "isilab/nn.hpp"
#include "isilab/rng.hpp"
#include "isilab/sampling.hpp"
#include "isilab/tensor.hpp"

namespace {

isilab::Tensor random_embeddings(std::int64_t n, std::int64_t d, std::uint64_t seed) {
  isilab::Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(n * d));
  for (auto& v : values) v = rng.uniform(-1.0, 1.0);
  return isilab::make_tensor({n, d}, std::move(values), true);
}

isilab::DistanceMatrix random_physical(std::int64_t n, std::uint64_t seed) {
  isilab::PatchBatch batch;
  batch.coordinate_mode = isilab::CoordinateMode::voxel;
  isilab::Rng rng(seed);
  for (std::int64_t i = 0; i < n; ++i) {
    batch.patches.push_back(isilab::Patch{});
    batch.centers.push_back(
        {rng.uniform(0.0, 64.0), rng.uniform(0.0, 64.0), rng.uniform(0.0, 64.0)});
  }
  return isilab::physical_distance_matrix(batch);
}

}  // namespace

static void bm_isimed(benchmark::State& state) {
  const auto n = state.range(0);
  const auto dp = random_physical(n, 11);
  for (auto _ : state) {
    auto z = random_embeddings(n, 32, 12);
    auto loss = isilab::isimed_loss(isilab::pairwise_embedding_distances(z), dp);
    isilab::backward(loss);
    benchmark::DoNotOptimize(loss.node->values.data());
  }
}
BENCHMARK(bm_isimed)->Arg(16)->Arg(64);

static void bm_ntxent(benchmark::State& state) {
  const auto n = state.range(0);
  for (auto _ : state) {
    auto z1 = random_embeddings(n, 128, 13);
    auto z2 = random_embeddings(n, 128, 14);
    auto loss = isilab::ntxent_loss(z1, z2, 0.05);
    isilab::backward(loss);
    benchmark::DoNotOptimize(loss.node->values.data());
  }
}
BENCHMARK(bm_ntxent)->Arg(16)->Arg(64);

static void bm_barlow(benchmark::State& state) {
  const auto n = state.range(0);
  for (auto _ : state) {
    auto z1 = random_embeddings(n, 128, 15);
    auto z2 = random_embeddings(n, 128, 16);
    auto loss = isilab::barlow_twins_loss(z1, z2, 0.005);
    isilab::backward(loss);
    benchmark::DoNotOptimize(loss.node->values.data());
  }
}
BENCHMARK(bm_barlow)->Arg(16)->Arg(64);

static void bm_training_step(benchmark::State& state) {
  isilab::EncoderConfig cfg;
  cfg.kind = isilab::EncoderKind::conv3d_small;
  cfg.input_patch = 16;
  cfg.backbone_dim = 64;
  cfg.head_isimed_dim = 32;
  cfg.head_barlow_dim = 128;
  cfg.conv_channels = {8, 16, 32};
  cfg.seed = 17;
  isilab::Model model = isilab::init_model(cfg, true);
  const auto x1 = random_embeddings(64, 16 * 16 * 16, 18);
  const auto x2 = random_embeddings(64, 16 * 16 * 16, 19);
  const auto dp = random_physical(64, 20);
  isilab::LossConfig lc;
  lc.method = isilab::LossMethod::reg_isimed;
  for (auto _ : state) {
    auto loss = isilab::reg_isimed_loss(model, isilab::forward_encoder(model, x1),
                                        isilab::forward_encoder(model, x2), dp, lc);
    isilab::backward(loss);
    benchmark::DoNotOptimize(loss.node->values.data());
  }
}
BENCHMARK(bm_training_step);

BENCHMARK_MAIN();
