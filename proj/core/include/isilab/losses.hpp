#pragma once

#include "isilab/nn.hpp"
#include "isilab/sampling.hpp"
#include "isilab/tensor.hpp"

namespace isilab {

enum class LossMethod { isimed, simclr, barlow, reg_isimed };

struct LossConfig {
  LossMethod method = LossMethod::isimed;
  double tau = 0.05;
  double lambda_bt = 0.005;
  double lambda_scale = 1e3;
};

void validate(const LossConfig& config);

// Euclidean distances between all embedding row pairs, on the autodiff graph
// so training can pull embeddings toward a target geometry.
inline Tensor pairwise_embedding_distances(const Tensor& z) { return pairwise_distance(z); }

// detach an [n,n] distance tensor into the plain matrix form
DistanceMatrix to_distance_matrix(const Tensor& d);

// Mean squared difference over the n(n-1)/2 unordered off-diagonal pairs;
// both diagonals are identically zero and excluded.
Tensor isimed_loss(const Tensor& d_latent, const DistanceMatrix& d_physical);

// Normalized-temperature cross-entropy over the 2n anchors: each row of one
// view scores all 2n-1 other rows by cosine similarity / tau, with its
// counterpart in the other view as the positive.
Tensor ntxent_loss(const Tensor& z1, const Tensor& z2, double tau);

// Per-dimension batch standardization of each view, cross-correlation
// C = Z1s^T Z2s / n, then sum (1-C_ii)^2 + lambda_bt * sum_{i!=j} C_ij^2.
Tensor barlow_twins_loss(const Tensor& z1, const Tensor& z2, double lambda_bt);

// Distance regression through the narrow head on both views (averaged) plus
// lambda_scale times the redundancy-reduction loss through the wide head.
// The backbone rows stay the exported representation.
Tensor reg_isimed_loss(const Model& model, const Tensor& backbone1, const Tensor& backbone2,
                       const DistanceMatrix& d_physical, const LossConfig& config);

}  // namespace isilab
