#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isilab/tensor.hpp"

namespace isilab {

// Volumetric ops work on channels-last rank-5 tensors [n, d, h, w, c].
// conv3d is 3x3x3, stride 1, zero-padded so spatial extents are preserved;
// weights are [3,3,3, c_in, c_out], bias is [c_out].
Tensor conv3d(const Tensor& x, const Tensor& weights, const Tensor& bias);

// mean over each 2x2x2 spatial block; spatial extents must be even
Tensor avg_downsample2(const Tensor& x);

// mean over all spatial positions: [n, d, h, w, c] -> [n, c]
Tensor global_avg_pool(const Tensor& x);

// Euclidean distances between all row pairs of z [n, k] -> [n, n].
// The diagonal is exactly zero, and coincident rows get a zero subgradient.
Tensor pairwise_distance(const Tensor& z);

// rows scaled to unit Euclidean norm; ZeroNormRow below 1e-12
Tensor normalize_rows(const Tensor& z);

// per-column (x - mean) / (std + 1e-12) with the population std
Tensor standardize_columns(const Tensor& z);

enum class EncoderKind { conv3d_small, mlp };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::conv3d_small;
  std::int64_t input_patch = 32;
  std::int64_t backbone_dim = 1024;
  std::int64_t head_isimed_dim = 512;
  std::int64_t head_barlow_dim = 2048;
  std::vector<std::int64_t> conv_channels = {8, 16, 32};
  std::uint64_t seed = 0;
};

void validate(const EncoderConfig& config);

struct NamedParam {
  std::string name;
  Tensor value;
};

struct Model {
  EncoderConfig config;
  std::vector<NamedParam> params;
  bool has_heads = false;

  const Tensor& param(const std::string& name) const;
};

// Deterministic initialization from config.seed: weights uniform in
// +-1/sqrt(fan_in) drawn in registration order, biases zero. Heads are two
// extra linear maps (head_isimed, head_barlow) off the backbone output.
Model init_model(const EncoderConfig& config, bool with_heads);

// x holds one flattened patch per row, [n, s^3] -> [n, backbone_dim]
Tensor forward_encoder(const Model& model, const Tensor& x);

// affine map of embedding rows, no nonlinearity: [n, d] x [d, k] + bias
Tensor linear_head(const Tensor& weight, const Tensor& bias, const Tensor& x);

}  // namespace isilab
