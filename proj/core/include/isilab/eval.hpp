#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "isilab/nn.hpp"
#include "isilab/sampling.hpp"
#include "isilab/tensor.hpp"

namespace isilab {

struct MetricsRecord {
  double auc = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  std::int64_t fold = 0;
};

struct PCAResult {
  std::int64_t n = 0;
  std::int64_t d = 0;
  std::int64_t k = 0;
  std::vector<double> components;          // k x d row-major, orthonormal rows
  std::vector<double> explained_variance;  // k, nonincreasing
  std::vector<double> projections;         // n x k row-major
};

struct Probe {
  std::vector<NamedParam> params;  // probe.weight [d,1], probe.bias [1]
};

struct TTest {
  double t = 0.0;
  double p = 1.0;
};

struct DistanceErrorStats {
  double q05 = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double q95 = 0.0;
};

// Frozen forward pass over the backbone; rows in patch order. Chunked
// internally, output independent of the chunking.
Tensor embed_dataset(const Model& model, const std::vector<Patch>& patches);

// labels of a labeled patch set, in order; MissingData if any patch lacks one
std::vector<int> patch_labels(const std::vector<Patch>& patches);

// Mean of softplus(logit) - y*logit over rows: binary cross-entropy against
// {0,1} labels on the pre-sigmoid logits, evaluated in the stable form.
Tensor bce_with_logits_loss(const Tensor& logits, const std::vector<int>& labels);

// Full-batch logistic regression on frozen embeddings.
Probe train_linear_probe(const Tensor& z, const std::vector<int>& labels, std::int64_t steps,
                         double lr, std::uint64_t seed = 0);

// sigmoid(z w + b) per row
std::vector<double> probe_scores(const Probe& probe, const Tensor& z);

// Fraction of (positive, negative) pairs ranked correctly; ties count half.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Confusion-matrix metrics at the threshold (scores strictly above are
// positive) plus the threshold-free AUC. The fold field is left at zero.
MetricsRecord classification_metrics(const std::vector<double>& scores,
                                     const std::vector<int>& labels, double threshold = 0.5);

// Fold id per sample: each class is shuffled separately and dealt
// round-robin, so the test folds partition the samples and every fold holds
// both classes.
std::vector<std::int64_t> stratified_folds(const std::vector<int>& labels, std::int64_t k,
                                           std::uint64_t seed);

// Stratified k-fold: probe trained on the other k-1 folds, metrics on the
// held-out fold.
std::vector<MetricsRecord> kfold_cv(const Tensor& z, const std::vector<int>& labels,
                                    std::int64_t k, std::uint64_t seed,
                                    std::int64_t probe_steps = 200, double probe_lr = 0.01);

// Two-sided paired t-test on a-b with k-1 degrees of freedom; p evaluated
// through the regularized incomplete beta function.
TTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Top-k principal components of the row set: columns centered, eigenvectors
// of the sample covariance by descending eigenvalue, each component's first
// non-negligible coordinate made positive. Uses the n x n Gram matrix when
// d > n, where components beyond the data rank are unrecoverable
// (RankDeficient).
PCAResult pca(const Tensor& z, std::int64_t k);

// k x 3 row-major Pearson correlations between projection columns and the
// three spatial axes of the centers.
std::vector<double> spatial_correlation(const std::vector<double>& projections, std::int64_t n,
                                        std::int64_t k,
                                        const std::vector<std::array<double, 3>>& centers);

// Quantiles {5,25,50,75,95} of |d_latent - d_physical| over the strict upper
// triangle, by linear interpolation between order statistics.
DistanceErrorStats distance_error_stats(const DistanceMatrix& d_latent,
                                        const DistanceMatrix& d_physical);

struct LabeledMetrics {
  std::string model;
  MetricsRecord metrics;
};

void write_metrics_csv(const std::vector<LabeledMetrics>& rows,
                       const std::filesystem::path& path);
void write_quantiles_csv(const DistanceErrorStats& stats, const std::filesystem::path& path);
void write_correlation_csv(const std::vector<double>& correlations, std::int64_t k,
                           const std::filesystem::path& path);

// scatter panels of every principal-component projection against every
// spatial axis
void write_projection_svg(const std::vector<double>& projections, std::int64_t n, std::int64_t k,
                          const std::vector<std::array<double, 3>>& centers,
                          const std::filesystem::path& path);

}  // namespace isilab
