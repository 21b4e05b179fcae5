#include "isilab/nn.hpp"

#include <cmath>
#include <cstring>

#include "isilab/errors.hpp"
#include "isilab/kernels.hpp"
#include "isilab/rng.hpp"

namespace isilab {

namespace {

struct VolExtents {
  std::int64_t n, d, h, w, c;
};

VolExtents vol_extents(const Tensor& x, const char* op) {
  if (x.shape().size() != 5)
    throw ShapeMismatch(std::string(op) + " requires a rank-5 [n,d,h,w,c] tensor");
  return {x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3], x.shape()[4]};
}

// copy a [n,d,h,w,c] tensor into a buffer zero-padded by one voxel per face
std::vector<double> pad_one(const std::vector<double>& src, const VolExtents& e) {
  std::vector<double> dst(
      static_cast<std::size_t>(e.n * (e.d + 2) * (e.h + 2) * (e.w + 2) * e.c), 0.0);
  const std::int64_t row = e.w * e.c;
  for (std::int64_t n = 0; n < e.n; ++n)
    for (std::int64_t d = 0; d < e.d; ++d)
      for (std::int64_t h = 0; h < e.h; ++h) {
        const std::int64_t s = ((n * e.d + d) * e.h + h) * row;
        const std::int64_t t =
            (((n * (e.d + 2) + d + 1) * (e.h + 2) + h + 1) * (e.w + 2) + 1) * e.c;
        std::memcpy(dst.data() + t, src.data() + s, static_cast<std::size_t>(row) * sizeof(double));
      }
  return dst;
}

// accumulate the interior of a padded buffer back into a [n,d,h,w,c] gradient
void unpad_add(const std::vector<double>& padded, const VolExtents& e, std::vector<double>& dst) {
  const std::int64_t row = e.w * e.c;
  for (std::int64_t n = 0; n < e.n; ++n)
    for (std::int64_t d = 0; d < e.d; ++d)
      for (std::int64_t h = 0; h < e.h; ++h) {
        const std::int64_t t = ((n * e.d + d) * e.h + h) * row;
        const std::int64_t s =
            (((n * (e.d + 2) + d + 1) * (e.h + 2) + h + 1) * (e.w + 2) + 1) * e.c;
        for (std::int64_t i = 0; i < row; ++i) dst[t + i] += padded[s + i];
      }
}

}  // namespace

Tensor conv3d(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  const VolExtents e = vol_extents(x, "conv3d");
  const auto& ws = weights.shape();
  if (ws.size() != 5 || ws[0] != 3 || ws[1] != 3 || ws[2] != 3)
    throw ShapeMismatch("conv3d weights must be [3,3,3,c_in,c_out]");
  if (ws[3] != e.c) throw ShapeMismatch("conv3d weight input channels disagree with the input");
  const std::int64_t co = ws[4];
  if (bias.shape().size() != 1 || bias.shape()[0] != co)
    throw ShapeMismatch("conv3d bias length must equal the output channel count");

  std::vector<double> padded = pad_one(x.values(), e);
  std::vector<double> out(static_cast<std::size_t>(e.n * e.d * e.h * e.w * co));
  kernels::conv3d_fwd(e.n, e.c, co, e.d, e.h, e.w, padded.data(), weights.values().data(),
                      bias.values().data(), out.data());

  auto px = x.node, pw = weights.node, pb = bias.node;
  return make_op(
      "conv3d", {e.n, e.d, e.h, e.w, co}, std::move(out), {x, weights, bias},
      [px, pw, pb, e, co](TensorNode& self) {
        if (pw->requires_grad || pb->requires_grad) {
          std::vector<double> padded = pad_one(px->values, e);
          std::vector<double> gw(static_cast<std::size_t>(27 * e.c * co), 0.0);
          std::vector<double> gb(static_cast<std::size_t>(co), 0.0);
          kernels::conv3d_bwd_weight(e.n, e.c, co, e.d, e.h, e.w, self.grad.data(), padded.data(),
                                     gw.data(), gb.data());
          if (pw->requires_grad) {
            pw->ensure_grad();
            for (std::size_t i = 0; i < gw.size(); ++i) pw->grad[i] += gw[i];
          }
          if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < gb.size(); ++i) pb->grad[i] += gb[i];
          }
        }
        if (px->requires_grad) {
          std::vector<double> gin(
              static_cast<std::size_t>(e.n * (e.d + 2) * (e.h + 2) * (e.w + 2) * e.c), 0.0);
          kernels::conv3d_bwd_input(e.n, e.c, co, e.d, e.h, e.w, self.grad.data(),
                                    pw->values.data(), gin.data());
          px->ensure_grad();
          unpad_add(gin, e, px->grad);
        }
      });
}

Tensor avg_downsample2(const Tensor& x) {
  const VolExtents e = vol_extents(x, "avg_downsample2");
  if (e.d % 2 != 0 || e.h % 2 != 0 || e.w % 2 != 0)
    throw ShapeMismatch("avg_downsample2 requires even spatial extents");
  const std::int64_t od = e.d / 2, oh = e.h / 2, ow = e.w / 2;
  std::vector<double> out(static_cast<std::size_t>(e.n * od * oh * ow * e.c), 0.0);
  const auto& in = x.values();
  auto in_at = [e](std::int64_t n, std::int64_t d, std::int64_t h, std::int64_t w) {
    return (((n * e.d + d) * e.h + h) * e.w + w) * e.c;
  };
  std::size_t o = 0;
  for (std::int64_t n = 0; n < e.n; ++n)
    for (std::int64_t d = 0; d < od; ++d)
      for (std::int64_t h = 0; h < oh; ++h)
        for (std::int64_t w = 0; w < ow; ++w, o += static_cast<std::size_t>(e.c))
          for (std::int64_t dd = 0; dd < 2; ++dd)
            for (std::int64_t hh = 0; hh < 2; ++hh)
              for (std::int64_t ww = 0; ww < 2; ++ww) {
                const std::int64_t s = in_at(n, 2 * d + dd, 2 * h + hh, 2 * w + ww);
                for (std::int64_t c = 0; c < e.c; ++c) out[o + c] += 0.125 * in[s + c];
              }
  auto px = x.node;
  return make_op("avg_downsample2", {e.n, od, oh, ow, e.c}, std::move(out), {x},
                 [px, e, od, oh, ow, in_at](TensorNode& self) {
                   px->ensure_grad();
                   std::size_t o = 0;
                   for (std::int64_t n = 0; n < e.n; ++n)
                     for (std::int64_t d = 0; d < od; ++d)
                       for (std::int64_t h = 0; h < oh; ++h)
                         for (std::int64_t w = 0; w < ow; ++w, o += static_cast<std::size_t>(e.c))
                           for (std::int64_t dd = 0; dd < 2; ++dd)
                             for (std::int64_t hh = 0; hh < 2; ++hh)
                               for (std::int64_t ww = 0; ww < 2; ++ww) {
                                 const std::int64_t s = in_at(n, 2 * d + dd, 2 * h + hh, 2 * w + ww);
                                 for (std::int64_t c = 0; c < e.c; ++c)
                                   px->grad[s + c] += 0.125 * self.grad[o + c];
                               }
                 });
}

Tensor global_avg_pool(const Tensor& x) {
  const VolExtents e = vol_extents(x, "global_avg_pool");
  const std::int64_t spatial = e.d * e.h * e.w;
  const double inv = 1.0 / static_cast<double>(spatial);
  std::vector<double> out(static_cast<std::size_t>(e.n * e.c), 0.0);
  const auto& in = x.values();
  for (std::int64_t n = 0; n < e.n; ++n)
    for (std::int64_t s = 0; s < spatial; ++s)
      for (std::int64_t c = 0; c < e.c; ++c)
        out[n * e.c + c] += inv * in[(n * spatial + s) * e.c + c];
  auto px = x.node;
  return make_op("global_avg_pool", {e.n, e.c}, std::move(out), {x},
                 [px, e, spatial, inv](TensorNode& self) {
                   px->ensure_grad();
                   for (std::int64_t n = 0; n < e.n; ++n)
                     for (std::int64_t s = 0; s < spatial; ++s)
                       for (std::int64_t c = 0; c < e.c; ++c)
                         px->grad[(n * spatial + s) * e.c + c] += inv * self.grad[n * e.c + c];
                 });
}

Tensor pairwise_distance(const Tensor& z) {
  if (z.shape().size() != 2) throw ShapeMismatch("pairwise_distance requires a [n,k] matrix");
  const std::int64_t n = z.shape()[0], k = z.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(n * n), 0.0);
  const auto& v = z.values();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::int64_t t = 0; t < k; ++t) {
        const double diff = v[i * k + t] - v[j * k + t];
        acc += diff * diff;
      }
      const double dist = std::sqrt(acc);
      out[i * n + j] = dist;
      out[j * n + i] = dist;
    }
  auto pz = z.node;
  return make_op("pairwise_distance", {n, n}, std::move(out), {z},
                 [pz, n, k](TensorNode& self) {
                   pz->ensure_grad();
                   for (std::int64_t i = 0; i < n; ++i)
                     for (std::int64_t j = i + 1; j < n; ++j) {
                       const double dist = self.values[i * n + j];
                       if (dist == 0.0) continue;
                       const double coef = (self.grad[i * n + j] + self.grad[j * n + i]) / dist;
                       for (std::int64_t t = 0; t < k; ++t) {
                         const double diff = pz->values[i * k + t] - pz->values[j * k + t];
                         pz->grad[i * k + t] += coef * diff;
                         pz->grad[j * k + t] -= coef * diff;
                       }
                     }
                 });
}

Tensor normalize_rows(const Tensor& z) {
  if (z.shape().size() != 2) throw ShapeMismatch("normalize_rows requires a [n,k] matrix");
  const std::int64_t n = z.shape()[0], k = z.shape()[1];
  std::vector<double> out(z.values().size());
  std::vector<double> norms(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::int64_t t = 0; t < k; ++t) acc += z.values()[i * k + t] * z.values()[i * k + t];
    const double norm = std::sqrt(acc);
    if (norm < 1e-12)
      throw ZeroNormRow("row " + std::to_string(i) + " has a near-zero norm");
    norms[static_cast<std::size_t>(i)] = norm;
    for (std::int64_t t = 0; t < k; ++t) out[i * k + t] = z.values()[i * k + t] / norm;
  }
  auto pz = z.node;
  return make_op("normalize_rows", {n, k}, std::move(out), {z},
                 [pz, n, k, norms = std::move(norms)](TensorNode& self) {
                   pz->ensure_grad();
                   for (std::int64_t i = 0; i < n; ++i) {
                     double dot = 0.0;
                     for (std::int64_t t = 0; t < k; ++t)
                       dot += self.grad[i * k + t] * self.values[i * k + t];
                     const double inv = 1.0 / norms[static_cast<std::size_t>(i)];
                     for (std::int64_t t = 0; t < k; ++t)
                       pz->grad[i * k + t] +=
                           (self.grad[i * k + t] - dot * self.values[i * k + t]) * inv;
                   }
                 });
}

Tensor standardize_columns(const Tensor& z) {
  if (z.shape().size() != 2) throw ShapeMismatch("standardize_columns requires a [n,k] matrix");
  const std::int64_t n = z.shape()[0], k = z.shape()[1];
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> out(z.values().size());
  std::vector<double> sigma(static_cast<std::size_t>(k));
  const auto& v = z.values();
  for (std::int64_t j = 0; j < k; ++j) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < n; ++i) mean += v[i * k + j];
    mean *= inv_n;
    double var = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double c = v[i * k + j] - mean;
      var += c * c;
    }
    const double sd = std::sqrt(var * inv_n);
    sigma[static_cast<std::size_t>(j)] = sd;
    const double inv_s = 1.0 / (sd + 1e-12);
    for (std::int64_t i = 0; i < n; ++i) out[i * k + j] = (v[i * k + j] - mean) * inv_s;
  }
  auto pz = z.node;
  return make_op(
      "standardize_columns", {n, k}, std::move(out), {z},
      [pz, n, k, inv_n, sigma = std::move(sigma)](TensorNode& self) {
        pz->ensure_grad();
        for (std::int64_t j = 0; j < k; ++j) {
          const double sd = sigma[static_cast<std::size_t>(j)];
          const double inv_s = 1.0 / (sd + 1e-12);
          double gmean = 0.0, gdot = 0.0;
          for (std::int64_t i = 0; i < n; ++i) {
            gmean += self.grad[i * k + j];
            gdot += self.grad[i * k + j] * self.values[i * k + j];
          }
          gmean *= inv_n;
          const double sd_term = sd > 0.0 ? gdot * inv_n / sd : 0.0;
          for (std::int64_t i = 0; i < n; ++i)
            pz->grad[i * k + j] += (self.grad[i * k + j] - gmean) * inv_s -
                                   sd_term * self.values[i * k + j];
        }
      });
}

void validate(const EncoderConfig& config) {
  if (config.input_patch <= 0) throw InvalidConfig("input_patch must be positive");
  if (config.backbone_dim <= 0) throw InvalidConfig("backbone_dim must be positive");
  if (config.head_isimed_dim <= 0 || config.head_barlow_dim <= 0)
    throw InvalidConfig("head dimensions must be positive");
  if (config.kind == EncoderKind::conv3d_small) {
    if (config.conv_channels.empty()) throw InvalidConfig("conv_channels must not be empty");
    for (auto c : config.conv_channels)
      if (c <= 0) throw InvalidConfig("conv_channels entries must be positive");
    const auto stages = static_cast<std::int64_t>(config.conv_channels.size());
    if (stages >= 62 || config.input_patch % (std::int64_t{1} << stages) != 0)
      throw InvalidConfig("input_patch must be divisible by 2^len(conv_channels)");
  }
}

const Tensor& Model::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw MissingData("model has no parameter named " + name);
}

namespace {

Tensor init_weight(Rng& rng, std::vector<std::int64_t> shape, std::int64_t fan_in) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(static_cast<std::size_t>(n));
  for (auto& v : values) v = rng.uniform(-bound, bound);
  return make_tensor(std::move(shape), std::move(values), true);
}

void add_linear(Model& model, Rng& rng, const std::string& name, std::int64_t in,
                std::int64_t out) {
  model.params.push_back({name + ".weight", init_weight(rng, {in, out}, in)});
  model.params.push_back({name + ".bias", make_zeros({out}, true)});
}

}  // namespace

Model init_model(const EncoderConfig& config, bool with_heads) {
  validate(config);
  Model model;
  model.config = config;
  model.has_heads = with_heads;
  Rng rng(config.seed);
  const std::int64_t s = config.input_patch;
  if (config.kind == EncoderKind::conv3d_small) {
    std::int64_t ci = 1;
    for (std::size_t i = 0; i < config.conv_channels.size(); ++i) {
      const std::int64_t co = config.conv_channels[i];
      model.params.push_back({"conv" + std::to_string(i) + ".weight",
                              init_weight(rng, {3, 3, 3, ci, co}, 27 * ci)});
      model.params.push_back({"conv" + std::to_string(i) + ".bias", make_zeros({co}, true)});
      ci = co;
    }
    add_linear(model, rng, "backbone", ci, config.backbone_dim);
  } else {
    add_linear(model, rng, "fc0", s * s * s, 256);
    add_linear(model, rng, "fc1", 256, 256);
    add_linear(model, rng, "backbone", 256, config.backbone_dim);
  }
  if (with_heads) {
    add_linear(model, rng, "head_isimed", config.backbone_dim, config.head_isimed_dim);
    add_linear(model, rng, "head_barlow", config.backbone_dim, config.head_barlow_dim);
  }
  return model;
}

Tensor forward_encoder(const Model& model, const Tensor& x) {
  const std::int64_t s = model.config.input_patch;
  if (x.shape().size() != 2 || x.shape()[1] != s * s * s)
    throw ShapeMismatch("encoder input must be [n, input_patch^3]");
  const std::int64_t n = x.shape()[0];
  if (model.config.kind == EncoderKind::conv3d_small) {
    Tensor h = reshape(x, {n, s, s, s, 1});
    for (std::size_t i = 0; i < model.config.conv_channels.size(); ++i) {
      const std::string stem = "conv" + std::to_string(i);
      h = conv3d(h, model.param(stem + ".weight"), model.param(stem + ".bias"));
      h = avg_downsample2(relu(h));
    }
    h = global_avg_pool(h);
    return linear_head(model.param("backbone.weight"), model.param("backbone.bias"), h);
  }
  Tensor h = relu(add_bias(matmul(x, model.param("fc0.weight")), model.param("fc0.bias")));
  h = relu(add_bias(matmul(h, model.param("fc1.weight")), model.param("fc1.bias")));
  return linear_head(model.param("backbone.weight"), model.param("backbone.bias"), h);
}

Tensor linear_head(const Tensor& weight, const Tensor& bias, const Tensor& x) {
  return add_bias(matmul(x, weight), bias);
}

}  // namespace isilab
