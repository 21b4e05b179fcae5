#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "gradcheck.hpp"
#include "isilab/checkpoint.hpp"
#include "isilab/errors.hpp"
#include "isilab/kernels.hpp"
#include "isilab/nn.hpp"
#include "isilab/optim.hpp"
#include "isilab/rng.hpp"
#include "isilab/tensor.hpp"
#include "testutil.hpp"

using namespace isilab;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, std::uint64_t seed, bool requires_grad,
                     double lo = -1.0, double hi = 1.0) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  Rng rng(seed);
  std::vector<double> values(static_cast<std::size_t>(n));
  for (auto& v : values) v = rng.uniform(lo, hi);
  return make_tensor(std::move(shape), std::move(values), requires_grad);
}

// random fixed weighting so every output element feeds the scalar differently
Tensor weighted_sum(const Tensor& t, std::uint64_t seed) {
  return sum_all(mul(t, random_tensor(t.shape(), seed, false)));
}

double check_op(const std::function<Tensor(const std::vector<Tensor>&)>& build,
                std::vector<Tensor> leaves) {
  const auto result = testutil::grad_check(build, std::move(leaves));
  REQUIRE_FALSE(result.near_kink);
  return result.max_rel_err;
}

}  // namespace

TEST_CASE("tensors validate shape against value count") {
  CHECK_NOTHROW(make_tensor({2, 3}, std::vector<double>(6, 0.0)));
  CHECK_THROWS_AS(make_tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeMismatch);
  CHECK_THROWS_AS(make_tensor({0, 3}, {}), ShapeMismatch);
  CHECK_THROWS_AS(make_tensor({2, -3}, std::vector<double>(6, 0.0)), ShapeMismatch);
}

TEST_CASE("gradients stay unallocated until a backward pass needs them") {
  Tensor w = random_tensor({4}, 1, true);
  CHECK(w.grad().empty());
  Tensor loss = sum_all(w);
  CHECK(w.grad().empty());
  backward(loss);
  CHECK(w.grad().size() == 4);
}

TEST_CASE("sum of a tensor backpropagates all-ones") {
  Tensor w = random_tensor({2, 3}, 2, true);
  backward(sum_all(w));
  for (double g : w.grad()) CHECK(g == 1.0);
}

TEST_CASE("sum of squares at [1,-2] gives gradient [2,-4]") {
  Tensor w = make_tensor({2}, {1.0, -2.0}, true);
  backward(sum_all(mul(w, w)));
  CHECK(w.grad()[0] == doctest::Approx(2.0));
  CHECK(w.grad()[1] == doctest::Approx(-4.0));
}

TEST_CASE("repeated backward calls accumulate gradients") {
  Tensor w = random_tensor({3}, 3, true);
  Tensor loss = sum_all(mul(w, w));
  backward(loss);
  const auto once = w.grad();
  backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad()[i] == doctest::Approx(2 * once[i]));
}

TEST_CASE("constants do not join the graph and get no gradient") {
  Tensor w = random_tensor({3}, 4, true);
  Tensor c = random_tensor({3}, 5, false);
  backward(sum_all(mul(w, c)));
  CHECK(w.grad().size() == 3);
  CHECK(c.grad().empty());
  Tensor pure = add(c, c);
  CHECK_FALSE(pure.requires_grad());
  CHECK(pure.node->parents.empty());
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor w = random_tensor({2, 2}, 6, true);
  CHECK_THROWS_AS(backward(add(w, w)), ShapeMismatch);
}

TEST_CASE("a cyclic graph is reported rather than walked forever") {
  Tensor w = random_tensor({1}, 7, true);
  Tensor loss = sum_all(w);
  loss.node->parents.push_back(loss.node);
  CHECK_THROWS_AS(backward(loss), GraphCycle);
}

TEST_CASE("a node with parents but no backward rule is unsupported") {
  Tensor w = random_tensor({1}, 8, true);
  auto node = std::make_shared<TensorNode>();
  node->shape = {1};
  node->values = {2.0};
  node->requires_grad = true;
  node->op = "mystery";
  node->parents = {w.node};
  CHECK_THROWS_AS(backward(Tensor(node)), UnsupportedOp);
}

TEST_CASE("elementwise ops demand identical shapes") {
  Tensor a = random_tensor({2, 3}, 9, true);
  Tensor b = random_tensor({3, 2}, 10, true);
  CHECK_THROWS_AS(add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(sub(a, b), ShapeMismatch);
  CHECK_THROWS_AS(mul(a, b), ShapeMismatch);
}

TEST_CASE("matrix products check their contracted dimensions") {
  Tensor a = random_tensor({2, 3}, 11, true);
  Tensor b = random_tensor({2, 4}, 12, true);
  CHECK_THROWS_AS(matmul(a, b), ShapeMismatch);
  CHECK(matmul_tn(a, b).shape() == std::vector<std::int64_t>{3, 4});
  CHECK_THROWS_AS(matmul_nt(a, b), ShapeMismatch);
}

TEST_CASE("dense products agree with a naive triple loop") {
  const std::int64_t m = 5, k = 7, n = 4;
  Tensor a = random_tensor({m, k}, 13, false);
  Tensor b = random_tensor({k, n}, 14, false);
  Tensor c = matmul(a, b);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double want = 0.0;
      for (std::int64_t t = 0; t < k; ++t) want += a.values()[i * k + t] * b.values()[t * n + j];
      CHECK(c.values()[i * n + j] == doctest::Approx(want).epsilon(1e-12));
    }

  Tensor at = random_tensor({k, m}, 15, false);
  Tensor c2 = matmul_tn(at, b);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double want = 0.0;
      for (std::int64_t t = 0; t < k; ++t) want += at.values()[t * m + i] * b.values()[t * n + j];
      CHECK(c2.values()[i * n + j] == doctest::Approx(want).epsilon(1e-12));
    }

  Tensor bt = random_tensor({n, k}, 16, false);
  Tensor c3 = matmul_nt(a, bt);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      double want = 0.0;
      for (std::int64_t t = 0; t < k; ++t) want += a.values()[i * k + t] * bt.values()[j * k + t];
      CHECK(c3.values()[i * n + j] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("gemm kernels accumulate into the output") {
  const std::int64_t m = 3, k = 2, n = 3;
  Tensor a = random_tensor({m, k}, 17, false);
  Tensor b = random_tensor({k, n}, 18, false);
  std::vector<double> c(static_cast<std::size_t>(m * n), 1.5);
  kernels::gemm_nn(m, n, k, a.values().data(), b.values().data(), c.data());
  Tensor fresh = matmul(a, b);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(c[i] == doctest::Approx(1.5 + fresh.values()[i]));
}

TEST_CASE("elementwise and reduction gradients match finite differences") {
  auto no_kink_ops = [](const std::vector<Tensor>& in) {
    Tensor s = sub(in[0], in[1]);
    Tensor p = mul(add(in[0], in[1]), s);
    return add(weighted_sum(scale(p, 0.7), 101), mean_all(s));
  };
  CHECK(check_op(no_kink_ops, {random_tensor({3, 4}, 19, true), random_tensor({3, 4}, 20, true)}) <
        1e-4);
}

TEST_CASE("rectifier gradient matches finite differences away from the kink") {
  auto build = [](const std::vector<Tensor>& in) { return weighted_sum(relu(in[0]), 102); };
  // seed chosen so no pre-activation sits within 1e-4 of zero
  CHECK(check_op(build, {random_tensor({4, 5}, 21, true)}) < 1e-4);
}

TEST_CASE("matrix product gradients match finite differences") {
  auto nn = [](const std::vector<Tensor>& in) {
    return weighted_sum(matmul(in[0], in[1]), 103);
  };
  CHECK(check_op(nn, {random_tensor({3, 4}, 22, true), random_tensor({4, 2}, 23, true)}) < 1e-4);

  auto tn = [](const std::vector<Tensor>& in) {
    return weighted_sum(matmul_tn(in[0], in[1]), 104);
  };
  CHECK(check_op(tn, {random_tensor({4, 3}, 24, true), random_tensor({4, 2}, 25, true)}) < 1e-4);

  auto nt = [](const std::vector<Tensor>& in) {
    return weighted_sum(matmul_nt(in[0], in[1]), 105);
  };
  CHECK(check_op(nt, {random_tensor({3, 4}, 26, true), random_tensor({2, 4}, 27, true)}) < 1e-4);
}

TEST_CASE("bias, concatenation, and reshape gradients match finite differences") {
  auto build = [](const std::vector<Tensor>& in) {
    Tensor rows = concat_rows(add_bias(in[0], in[1]), in[2]);
    return weighted_sum(reshape(rows, {2, 10}), 106);
  };
  CHECK(check_op(build, {random_tensor({3, 4}, 28, true), random_tensor({4}, 29, true),
                         random_tensor({2, 4}, 30, true)}) < 1e-4);
}

TEST_CASE("convolution matches a naive channels-first reference") {
  const std::int64_t n = 2, s = 4;
  const std::pair<std::int64_t, std::int64_t> combos[] = {{1, 4}, {2, 3}};
  for (auto [ci, co] : combos) {
    Tensor x = random_tensor({n, s, s, s, ci}, 31 + ci, false);
    Tensor w = random_tensor({3, 3, 3, ci, co}, 32 + co, false);
    Tensor b = random_tensor({co}, 33, false);
    Tensor out = conv3d(x, w, b);
    REQUIRE(out.shape() == std::vector<std::int64_t>{n, s, s, s, co});
    auto x_at = [&](std::int64_t bn, std::int64_t d, std::int64_t h, std::int64_t ww,
                    std::int64_t c) -> double {
      if (d < 0 || d >= s || h < 0 || h >= s || ww < 0 || ww >= s) return 0.0;
      return x.values()[(((bn * s + d) * s + h) * s + ww) * ci + c];
    };
    for (std::int64_t bn = 0; bn < n; ++bn)
      for (std::int64_t d = 0; d < s; ++d)
        for (std::int64_t h = 0; h < s; ++h)
          for (std::int64_t ww = 0; ww < s; ++ww)
            for (std::int64_t oc = 0; oc < co; ++oc) {
              double want = b.values()[oc];
              for (std::int64_t kd = 0; kd < 3; ++kd)
                for (std::int64_t kh = 0; kh < 3; ++kh)
                  for (std::int64_t kw = 0; kw < 3; ++kw)
                    for (std::int64_t c = 0; c < ci; ++c)
                      want += x_at(bn, d + kd - 1, h + kh - 1, ww + kw - 1, c) *
                              w.values()[(((kd * 3 + kh) * 3 + kw) * ci + c) * co + oc];
              CHECK(out.values()[(((bn * s + d) * s + h) * s + ww) * co + oc] ==
                    doctest::Approx(want).epsilon(1e-10));
            }
  }
}

TEST_CASE("convolution gradients match finite differences") {
  auto build = [](const std::vector<Tensor>& in) {
    return weighted_sum(conv3d(in[0], in[1], in[2]), 107);
  };
  // one channel pair served by the specialized kernels, one by the fallback
  CHECK(check_op(build, {random_tensor({1, 4, 4, 4, 1}, 34, true),
                         random_tensor({3, 3, 3, 1, 4}, 35, true),
                         random_tensor({4}, 36, true)}) < 1e-4);
  CHECK(check_op(build, {random_tensor({2, 3, 4, 3, 2}, 37, true),
                         random_tensor({3, 3, 3, 2, 3}, 38, true),
                         random_tensor({3}, 39, true)}) < 1e-4);
}

TEST_CASE("convolution validates its operand shapes") {
  Tensor x = random_tensor({1, 4, 4, 4, 2}, 40, false);
  CHECK_THROWS_AS(conv3d(x, random_tensor({3, 3, 3, 1, 4}, 41, false),
                         random_tensor({4}, 42, false)),
                  ShapeMismatch);
  CHECK_THROWS_AS(conv3d(x, random_tensor({3, 3, 2, 2, 4}, 43, false),
                         random_tensor({4}, 44, false)),
                  ShapeMismatch);
  CHECK_THROWS_AS(conv3d(x, random_tensor({3, 3, 3, 2, 4}, 45, false),
                         random_tensor({3}, 46, false)),
                  ShapeMismatch);
}

TEST_CASE("block averaging halves each spatial extent") {
  Tensor x = random_tensor({2, 4, 6, 2, 3}, 47, false);
  Tensor y = avg_downsample2(x);
  CHECK(y.shape() == std::vector<std::int64_t>{2, 2, 3, 1, 3});
  double want = 0.0;
  for (std::int64_t dd = 0; dd < 2; ++dd)
    for (std::int64_t hh = 0; hh < 2; ++hh)
      for (std::int64_t ww = 0; ww < 2; ++ww)
        want += x.values()[(((0 * 4 + dd) * 6 + hh) * 2 + ww) * 3 + 1] / 8.0;
  CHECK(y.values()[1] == doctest::Approx(want));
  CHECK_THROWS_AS(avg_downsample2(random_tensor({1, 3, 4, 4, 1}, 48, false)), ShapeMismatch);
}

TEST_CASE("pooling gradients match finite differences") {
  auto down = [](const std::vector<Tensor>& in) {
    return weighted_sum(avg_downsample2(in[0]), 108);
  };
  CHECK(check_op(down, {random_tensor({2, 4, 2, 4, 2}, 49, true)}) < 1e-4);

  auto gap = [](const std::vector<Tensor>& in) {
    return weighted_sum(global_avg_pool(in[0]), 109);
  };
  CHECK(check_op(gap, {random_tensor({2, 3, 3, 3, 4}, 50, true)}) < 1e-4);
}

TEST_CASE("pairwise distances form a symmetric zero-diagonal matrix") {
  Tensor z = make_tensor({3, 2}, {0.0, 0.0, 3.0, 4.0, 0.0, 4.0}, false);
  Tensor d = pairwise_distance(z);
  CHECK(d.shape() == std::vector<std::int64_t>{3, 3});
  for (std::int64_t i = 0; i < 3; ++i) CHECK(d.values()[i * 3 + i] == 0.0);
  CHECK(d.values()[0 * 3 + 1] == doctest::Approx(5.0));
  CHECK(d.values()[1 * 3 + 0] == doctest::Approx(5.0));
  CHECK(d.values()[0 * 3 + 2] == doctest::Approx(4.0));
  CHECK(d.values()[1 * 3 + 2] == doctest::Approx(3.0));
}

TEST_CASE("coincident rows contribute a zero subgradient to distances") {
  Tensor z = make_tensor({2, 2}, {1.0, 2.0, 1.0, 2.0}, true);
  backward(sum_all(pairwise_distance(z)));
  for (double g : z.grad()) CHECK(g == 0.0);
}

TEST_CASE("pairwise distance gradients match finite differences") {
  auto build = [](const std::vector<Tensor>& in) {
    return weighted_sum(pairwise_distance(in[0]), 110);
  };
  // rows spread far apart so no distance sits near the zero kink
  Tensor z = random_tensor({5, 3}, 51, true);
  for (std::int64_t i = 0; i < 5; ++i) z.values()[i * 3] += 10.0 * static_cast<double>(i);
  CHECK(check_op(build, {z}) < 1e-4);
}

TEST_CASE("row normalization produces unit rows and flags zero rows") {
  Tensor z = make_tensor({2, 3}, {3.0, 0.0, 4.0, 0.0, 2.0, 0.0}, false);
  Tensor r = normalize_rows(z);
  CHECK(r.values()[0] == doctest::Approx(0.6));
  CHECK(r.values()[2] == doctest::Approx(0.8));
  CHECK(r.values()[4] == doctest::Approx(1.0));
  Tensor zero = make_tensor({2, 2}, {1.0, 1.0, 0.0, 0.0}, false);
  CHECK_THROWS_AS(normalize_rows(zero), ZeroNormRow);
}

TEST_CASE("row normalization gradients match finite differences") {
  auto build = [](const std::vector<Tensor>& in) {
    return weighted_sum(normalize_rows(in[0]), 111);
  };
  CHECK(check_op(build, {random_tensor({4, 3}, 52, true, 0.5, 1.5)}) < 1e-4);
}

TEST_CASE("column standardization yields zero mean and unit variance") {
  Tensor z = random_tensor({8, 3}, 53, false, -2.0, 5.0);
  Tensor s = standardize_columns(z);
  for (std::int64_t j = 0; j < 3; ++j) {
    double mean = 0.0, var = 0.0;
    for (std::int64_t i = 0; i < 8; ++i) mean += s.values()[i * 3 + j];
    mean /= 8.0;
    for (std::int64_t i = 0; i < 8; ++i) {
      const double c = s.values()[i * 3 + j] - mean;
      var += c * c;
    }
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var / 8.0 == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("a constant column standardizes to zeros without dividing by zero") {
  Tensor z = make_tensor({3, 2}, {1.0, 7.0, 1.0, 8.0, 1.0, 9.0}, true);
  Tensor s = standardize_columns(z);
  CHECK(s.values()[0] == 0.0);
  CHECK(s.values()[2] == 0.0);
  CHECK(s.values()[4] == 0.0);
  backward(weighted_sum(s, 112));
  for (double g : z.grad()) CHECK(std::isfinite(g));
}

TEST_CASE("column standardization gradients match finite differences") {
  auto build = [](const std::vector<Tensor>& in) {
    return weighted_sum(standardize_columns(in[0]), 113);
  };
  CHECK(check_op(build, {random_tensor({6, 4}, 54, true)}) < 1e-4);
}

TEST_CASE("encoder config validation rejects impossible settings") {
  EncoderConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.input_patch = 20;  // 20 is not divisible by 2^3
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
  cfg.input_patch = 32;
  cfg.backbone_dim = 0;
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
  cfg.backbone_dim = 8;
  cfg.conv_channels = {};
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
  cfg.conv_channels = {4, -2};
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
  cfg.kind = EncoderKind::mlp;
  cfg.conv_channels = {};
  CHECK_NOTHROW(validate(cfg));  // mlp ignores conv channel settings
  cfg.head_isimed_dim = 0;
  CHECK_THROWS_AS(validate(cfg), InvalidConfig);
}

namespace {

EncoderConfig tiny_conv_config(std::uint64_t seed = 5) {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::conv3d_small;
  cfg.input_patch = 4;
  cfg.backbone_dim = 6;
  cfg.head_isimed_dim = 3;
  cfg.head_barlow_dim = 5;
  cfg.conv_channels = {2, 3};
  cfg.seed = seed;
  return cfg;
}

EncoderConfig tiny_mlp_config(std::uint64_t seed = 6) {
  EncoderConfig cfg;
  cfg.kind = EncoderKind::mlp;
  cfg.input_patch = 3;
  cfg.backbone_dim = 6;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("model initialization is deterministic and seeded") {
  const auto cfg = tiny_conv_config();
  Model a = init_model(cfg, true);
  Model b = init_model(cfg, true);
  REQUIRE(a.params.size() == b.params.size());
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    CHECK(a.params[i].name == b.params[i].name);
    CHECK(a.params[i].value.values() == b.params[i].value.values());
  }
  auto other_cfg = cfg;
  other_cfg.seed = 99;
  Model c = init_model(other_cfg, true);
  CHECK(a.param("conv0.weight").values() != c.param("conv0.weight").values());
}

TEST_CASE("weights stay inside the fan-in bound and biases start at zero") {
  Model m = init_model(tiny_conv_config(), true);
  const double bound0 = 1.0 / std::sqrt(27.0);
  for (double v : m.param("conv0.weight").values()) {
    CHECK(v <= bound0);
    CHECK(v >= -bound0);
  }
  for (double v : m.param("conv1.weight").values()) {
    CHECK(std::abs(v) <= 1.0 / std::sqrt(27.0 * 2.0));
  }
  for (double v : m.param("backbone.bias").values()) CHECK(v == 0.0);
  for (double v : m.param("head_barlow.bias").values()) CHECK(v == 0.0);
}

TEST_CASE("heads exist only when requested") {
  Model with = init_model(tiny_conv_config(), true);
  CHECK(with.has_heads);
  CHECK(with.param("head_isimed.weight").shape() == std::vector<std::int64_t>{6, 3});
  CHECK(with.param("head_barlow.weight").shape() == std::vector<std::int64_t>{6, 5});
  Model without = init_model(tiny_conv_config(), false);
  CHECK_FALSE(without.has_heads);
  CHECK_THROWS_AS(without.param("head_isimed.weight"), MissingData);
}

TEST_CASE("a single patch becomes a single backbone row") {
  EncoderConfig cfg;  // stock configuration: 1024-wide backbone
  cfg.seed = 1;
  Model m = init_model(cfg, false);
  Tensor x = random_tensor({1, 32 * 32 * 32}, 60, false);
  Tensor z = forward_encoder(m, x);
  CHECK(z.shape() == std::vector<std::int64_t>{1, 1024});
}

TEST_CASE("encoders are batch-rowwise: duplicated inputs give duplicated outputs") {
  for (const auto& cfg : {tiny_conv_config(), tiny_mlp_config()}) {
    Model m = init_model(cfg, false);
    const std::int64_t s3 = cfg.input_patch * cfg.input_patch * cfg.input_patch;
    Tensor row = random_tensor({1, s3}, 61, false);
    std::vector<double> doubled = row.values();
    doubled.insert(doubled.end(), row.values().begin(), row.values().end());
    Tensor z = forward_encoder(m, make_tensor({2, s3}, doubled));
    for (std::int64_t j = 0; j < cfg.backbone_dim; ++j)
      CHECK(z.values()[j] == z.values()[cfg.backbone_dim + j]);
  }
}

TEST_CASE("zeroed weights and biases produce zero embeddings") {
  Model m = init_model(tiny_conv_config(), false);
  for (auto& p : m.params) std::fill(p.value.values().begin(), p.value.values().end(), 0.0);
  Tensor z = forward_encoder(m, random_tensor({3, 64}, 62, false));
  for (double v : z.values()) CHECK(v == 0.0);
}

TEST_CASE("encoders are permutation-equivariant over batch rows") {
  for (const auto& cfg : {tiny_conv_config(), tiny_mlp_config()}) {
    Model m = init_model(cfg, false);
    const std::int64_t s3 = cfg.input_patch * cfg.input_patch * cfg.input_patch;
    Tensor x = random_tensor({3, s3}, 63, false);
    Tensor z = forward_encoder(m, x);
    std::vector<std::int64_t> perm{2, 0, 1};
    std::vector<double> shuffled(x.values().size());
    for (std::int64_t i = 0; i < 3; ++i)
      std::copy_n(x.values().begin() + perm[i] * s3, s3, shuffled.begin() + i * s3);
    Tensor zp = forward_encoder(m, make_tensor({3, s3}, shuffled));
    for (std::int64_t i = 0; i < 3; ++i)
      for (std::int64_t j = 0; j < cfg.backbone_dim; ++j)
        CHECK(zp.values()[i * cfg.backbone_dim + j] ==
              z.values()[perm[i] * cfg.backbone_dim + j]);
  }
}

TEST_CASE("encoder rejects inputs that do not match the patch size") {
  Model m = init_model(tiny_conv_config(), false);
  CHECK_THROWS_AS(forward_encoder(m, random_tensor({2, 65}, 64, false)), ShapeMismatch);
  CHECK_THROWS_AS(forward_encoder(m, random_tensor({64}, 64, false)), ShapeMismatch);
}

TEST_CASE("linear head examples") {
  Tensor identity = make_tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}, false);
  Tensor zero2 = make_tensor({2}, {0.0, 0.0}, false);
  Tensor x = make_tensor({2, 2}, {3.0, -1.0, 0.5, 2.0}, false);
  Tensor same = linear_head(identity, zero2, x);
  CHECK(same.values() == x.values());

  Tensor zero_w = make_tensor({2, 2}, {0.0, 0.0, 0.0, 0.0}, false);
  Tensor b = make_tensor({2}, {0.25, -4.0}, false);
  Tensor rows = linear_head(zero_w, b, x);
  CHECK(rows.values() == std::vector<double>{0.25, -4.0, 0.25, -4.0});

  Tensor ones = make_tensor({2, 1}, {1.0, 1.0}, false);
  Tensor zero1 = make_tensor({1}, {0.0}, false);
  Tensor dot = linear_head(ones, zero1, make_tensor({1, 2}, {1.0, 2.0}, false));
  CHECK(dot.values() == std::vector<double>{3.0});
}

TEST_CASE("full encoder gradients match finite differences") {
  // conv path: every parameter; mlp path: a slice, since its fixed 256-wide
  // hidden layers make elementwise differencing of all weights too slow
  for (const auto& cfg : {tiny_conv_config(7), tiny_mlp_config(8)}) {
    Model m = init_model(cfg, false);
    const std::int64_t s3 = cfg.input_patch * cfg.input_patch * cfg.input_patch;
    Tensor x = random_tensor({2, s3}, 65, false);
    std::vector<Tensor> leaves;
    for (auto& p : m.params)
      if (cfg.kind == EncoderKind::conv3d_small || p.name.ends_with(".bias") ||
          p.name == "backbone.weight")
        leaves.push_back(p.value);
    auto build = [&m, &x](const std::vector<Tensor>&) {
      return weighted_sum(forward_encoder(m, x), 114);
    };
    const auto result = testutil::grad_check(build, leaves);
    REQUIRE_FALSE(result.near_kink);
    CHECK(result.max_rel_err < 1e-4);
  }
}

TEST_CASE("adamw leaves parameters alone when gradients are zero and decay is off") {
  Model m = init_model(tiny_mlp_config(), false);
  const auto before = m.param("fc0.weight").values();
  OptimizerState opt = make_optimizer(0.01);
  opt.weight_decay = 0.0;
  for (auto& p : m.params) p.value.node->ensure_grad();
  adamw_step(m.params, opt);
  CHECK(m.param("fc0.weight").values() == before);
  CHECK(opt.step == 1);
}

TEST_CASE("one adamw step on a unit scalar matches the hand-computed update") {
  std::vector<NamedParam> params{{"p", make_tensor({1}, {1.0}, true)}};
  params[0].value.node->grad = {1.0};
  OptimizerState opt = make_optimizer(0.001);
  opt.weight_decay = 0.0;
  adamw_step(params, opt);
  const double expected = 1.0 - 0.001 / (1.0 + 1e-8);
  CHECK(params[0].value.values()[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(params[0].value.grad()[0] == 0.0);
}

TEST_CASE("decoupled decay shrinks parameters independently of the gradient") {
  std::vector<NamedParam> params{{"p", make_tensor({1}, {2.0}, true)}};
  params[0].value.node->grad = {0.0};
  OptimizerState opt = make_optimizer(0.1);
  adamw_step(params, opt);
  CHECK(params[0].value.values()[0] == doctest::Approx(2.0 - 0.1 * 0.01 * 2.0));
}

TEST_CASE("the optimizer is a pure state transition") {
  auto run = []() {
    std::vector<NamedParam> params{{"w", make_tensor({3}, {0.5, -1.0, 2.0}, true)}};
    params[0].value.node->grad = {0.3, -0.2, 0.9};
    OptimizerState opt = make_optimizer(0.01);
    adamw_step(params, opt);
    params[0].value.node->grad = {-0.1, 0.4, 0.2};
    adamw_step(params, opt);
    return params[0].value.values();
  };
  CHECK(run() == run());
}

TEST_CASE("parameters never reached by a backward pass are skipped entirely") {
  Model m = init_model(tiny_mlp_config(), true);
  const auto head_before = m.param("head_barlow.weight").values();
  Tensor x = random_tensor({2, 27}, 66, false);
  backward(mean_all(forward_encoder(m, x)));
  OptimizerState opt = make_optimizer(0.05);
  adamw_step(m.params, opt);
  CHECK(m.param("head_barlow.weight").values() == head_before);  // no decay either
  CHECK(m.param("head_barlow.weight").grad().empty());
  CHECK(m.param("fc0.weight").values() != init_model(tiny_mlp_config(), true)
                                              .param("fc0.weight")
                                              .values());
}

TEST_CASE("non-finite gradients abort the step before any state changes") {
  std::vector<NamedParam> params{{"w", make_tensor({2}, {1.0, 2.0}, true)}};
  params[0].value.node->grad = {0.5, std::nan("")};
  OptimizerState opt = make_optimizer(0.01);
  CHECK_THROWS_AS(adamw_step(params, opt), NonFiniteGradient);
  CHECK(opt.step == 0);
  CHECK(opt.m.empty());
  CHECK(params[0].value.values() == std::vector<double>{1.0, 2.0});
}

TEST_CASE("exponential decay schedule") {
  CHECK(exp_lr(0.003, 0.9, 0) == 0.003);
  CHECK(exp_lr(0.001, 0.9, 2) == doctest::Approx(0.00081).epsilon(1e-12));
  for (std::int64_t e = 0; e < 5; ++e) CHECK(exp_lr(0.01, 1.0, e) == 0.01);
  CHECK(exp_lr(0.01, 0.5, 3) == doctest::Approx(0.00125));
}

TEST_CASE("checkpoints round-trip through float32 files") {
  testutil::TempDir dir("ckpt_roundtrip");
  Model m = init_model(tiny_conv_config(11), true);
  save_checkpoint(m, dir.path / "model");
  Model loaded = load_checkpoint(dir.path / "model");
  CHECK(loaded.has_heads);
  CHECK(loaded.config.kind == m.config.kind);
  CHECK(loaded.config.input_patch == m.config.input_patch);
  CHECK(loaded.config.backbone_dim == m.config.backbone_dim);
  CHECK(loaded.config.conv_channels == m.config.conv_channels);
  CHECK(loaded.config.seed == m.config.seed);
  REQUIRE(loaded.params.size() == m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    CHECK(loaded.params[i].name == m.params[i].name);
    REQUIRE(loaded.params[i].value.shape() == m.params[i].value.shape());
    for (std::size_t j = 0; j < m.params[i].value.values().size(); ++j)
      CHECK(loaded.params[i].value.values()[j] ==
            static_cast<double>(static_cast<float>(m.params[i].value.values()[j])));
  }
}

TEST_CASE("head presence is inferred from the stored tensor names") {
  testutil::TempDir dir("ckpt_heads");
  save_checkpoint(init_model(tiny_mlp_config(12), false), dir.path / "plain");
  CHECK_FALSE(load_checkpoint(dir.path / "plain").has_heads);
}

TEST_CASE("saving a checkpoint twice writes identical bytes") {
  testutil::TempDir dir("ckpt_bytes");
  Model m = init_model(tiny_conv_config(13), true);
  save_checkpoint(m, dir.path / "a");
  save_checkpoint(m, dir.path / "b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  for (const auto& entry : std::filesystem::directory_iterator(dir.path / "a")) {
    const auto name = entry.path().filename();
    CHECK(slurp(entry.path()) == slurp(dir.path / "b" / name));
  }
}

TEST_CASE("checkpoint loading rejects damaged stores") {
  testutil::TempDir dir("ckpt_damage");
  const auto base = dir.path / "model";
  Model m = init_model(tiny_conv_config(14), false);
  save_checkpoint(m, base);

  CHECK_THROWS_AS(load_checkpoint(dir.path / "absent"), IoError);

  SUBCASE("truncated tensor file") {
    std::filesystem::resize_file(base / "conv0.weight.bin", 10);
    CHECK_THROWS_AS(load_checkpoint(base), TruncatedData);
  }
  SUBCASE("trailing bytes after the tensor payload") {
    std::ofstream out(base / "conv0.weight.bin", std::ios::binary | std::ios::app);
    out.put('x');
    out.close();
    CHECK_THROWS_AS(load_checkpoint(base), FormatError);
  }
  SUBCASE("unparsable manifest") {
    std::ofstream out(base / "manifest.json", std::ios::binary | std::ios::trunc);
    out << "{not json";
    out.close();
    CHECK_THROWS_AS(load_checkpoint(base), FormatError);
  }
  SUBCASE("foreign format tag") {
    std::ifstream in(base / "manifest.json");
    std::string text(std::istreambuf_iterator<char>(in), {});
    in.close();
    const auto pos = text.find("isilab-checkpoint-v1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 20, "someone-elses-format");
    std::ofstream out(base / "manifest.json", std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(base), FormatError);
  }
  SUBCASE("tampered tensor name") {
    std::ifstream in(base / "manifest.json");
    std::string text(std::istreambuf_iterator<char>(in), {});
    in.close();
    const auto pos = text.find("conv0.weight");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 12, "convX.weight");
    std::ofstream out(base / "manifest.json", std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(base), ConfigMismatch);
  }
  SUBCASE("tampered tensor shape") {
    std::ifstream in(base / "manifest.json");
    std::string text(std::istreambuf_iterator<char>(in), {});
    in.close();
    const auto pos = text.find("[3,3,3,1,2]");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 11, "[3,3,3,2,1]");
    std::ofstream out(base / "manifest.json", std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(base), ConfigMismatch);
  }
}
