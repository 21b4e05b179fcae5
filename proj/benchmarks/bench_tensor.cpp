#include <benchmark/benchmark.h>

#include "isilab/nn.hpp"
#include "isilab/rng.hpp"
#include "isilab/tensor.hpp"

namespace {

isilab::Tensor random_tensor(std::vector<std::int64_t> shape, std::uint64_t seed) {
  std::int64_t count = 1;
  for (auto s : shape) count *= s;
  isilab::Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(count));
  for (auto& v : values) v = rng.uniform(-1.0, 1.0);
  return isilab::make_tensor(std::move(shape), std::move(values));
}

}  // namespace

static void bm_matmul(benchmark::State& state) {
  const auto n = state.range(0);
  const auto a = random_tensor({n, n}, 1);
  const auto b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    auto c = isilab::matmul(a, b);
    benchmark::DoNotOptimize(c.node->values.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_matmul)->Arg(64)->Arg(128)->Arg(256);

static void bm_conv3d(benchmark::State& state) {
  const auto s = state.range(0);
  const std::int64_t cin = 8, cout = 16;
  const auto x = random_tensor({4, s, s, s, cin}, 3);
  const auto w = random_tensor({3, 3, 3, cin, cout}, 4);
  const auto bias = random_tensor({cout}, 5);
  for (auto _ : state) {
    auto y = isilab::conv3d(x, w, bias);
    benchmark::DoNotOptimize(y.node->values.data());
  }
  state.SetItemsProcessed(state.iterations() * 4 * cout * cin * s * s * s * 27);
}
BENCHMARK(bm_conv3d)->Arg(8)->Arg(16);

static void bm_encoder_forward(benchmark::State& state) {
  isilab::EncoderConfig cfg;
  cfg.kind = isilab::EncoderKind::conv3d_small;
  cfg.input_patch = 16;
  cfg.backbone_dim = 64;
  cfg.conv_channels = {8, 16, 32};
  cfg.seed = 9;
  const auto model = isilab::init_model(cfg, false);
  const auto x = random_tensor({state.range(0), 16 * 16 * 16}, 6);
  for (auto _ : state) {
    auto z = isilab::forward_encoder(model, x);
    benchmark::DoNotOptimize(z.node->values.data());
  }
}
BENCHMARK(bm_encoder_forward)->Arg(8)->Arg(64);

static void bm_encoder_backward(benchmark::State& state) {
  isilab::EncoderConfig cfg;
  cfg.kind = isilab::EncoderKind::conv3d_small;
  cfg.input_patch = 16;
  cfg.backbone_dim = 64;
  cfg.conv_channels = {8, 16, 32};
  cfg.seed = 9;
  isilab::Model model = isilab::init_model(cfg, false);
  const auto x = random_tensor({state.range(0), 16 * 16 * 16}, 6);
  for (auto _ : state) {
    auto loss = isilab::mean_all(isilab::forward_encoder(model, x));
    isilab::backward(loss);
    benchmark::DoNotOptimize(loss.node->values.data());
  }
}
BENCHMARK(bm_encoder_backward)->Arg(8)->Arg(64);

BENCHMARK_MAIN();
