#include "isilab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "isilab/errors.hpp"
#include "isilab/optim.hpp"
#include "isilab/rng.hpp"

namespace isilab {

Tensor embed_dataset(const Model& model, const std::vector<Patch>& patches) {
  if (patches.empty()) throw MissingData("no patches to embed");
  const std::int64_t s = model.config.input_patch;
  for (const auto& p : patches)
    if (p.size != s)
      throw ConfigMismatch("patch size " + std::to_string(p.size) +
                           " does not match the encoder input " + std::to_string(s));
  const auto n = static_cast<std::int64_t>(patches.size());
  const std::int64_t d = model.config.backbone_dim;
  const std::int64_t volume = s * s * s;

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n * d));
  const std::int64_t chunk = 64;
  for (std::int64_t start = 0; start < n; start += chunk) {
    const std::int64_t m = std::min(chunk, n - start);
    std::vector<double> rows;
    rows.reserve(static_cast<std::size_t>(m * volume));
    for (std::int64_t i = start; i < start + m; ++i)
      for (float v : patches[static_cast<std::size_t>(i)].data)
        rows.push_back(static_cast<double>(v));
    Tensor z = forward_encoder(model, make_tensor({m, volume}, std::move(rows)));
    out.insert(out.end(), z.values().begin(), z.values().end());
  }
  return make_tensor({n, d}, std::move(out));
}

std::vector<int> patch_labels(const std::vector<Patch>& patches) {
  std::vector<int> labels;
  labels.reserve(patches.size());
  for (const auto& p : patches) {
    if (!p.label) throw MissingData("patch without a label in a labeled dataset");
    labels.push_back(*p.label);
  }
  return labels;
}

namespace {

void check_binary_labels(const std::vector<int>& labels) {
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InvalidConfig("labels must be 0 or 1");
    (y == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw SingleClass("both classes must be present");
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

Tensor bce_with_logits_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2 || logits.shape()[1] != 1)
    throw DimensionMismatch("logits must be an [n,1] column");
  const std::int64_t n = logits.shape()[0];
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw DimensionMismatch("one label per logit required");
  for (int y : labels)
    if (y != 0 && y != 1) throw InvalidConfig("labels must be 0 or 1");

  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = logits.values()[static_cast<std::size_t>(i)];
    loss += std::max(x, 0.0) - x * labels[static_cast<std::size_t>(i)] +
            std::log1p(std::exp(-std::abs(x)));
  }
  loss /= static_cast<double>(n);

  const double inv_n = 1.0 / static_cast<double>(n);
  auto labels_copy = labels;
  return make_op("bce_with_logits", {1}, {loss}, {logits},
                 [labels_copy, inv_n](TensorNode& node) {
                   auto& px = *node.parents[0];
                   if (!px.requires_grad) return;
                   px.ensure_grad();
                   const double g = node.grad[0];
                   for (std::size_t i = 0; i < px.values.size(); ++i)
                     px.grad[i] += g * inv_n * (sigmoid(px.values[i]) - labels_copy[i]);
                 });
}

Probe train_linear_probe(const Tensor& z, const std::vector<int>& labels, std::int64_t steps,
                         double lr, std::uint64_t seed) {
  if (z.shape().size() != 2) throw DimensionMismatch("embeddings must be an [n,d] matrix");
  const std::int64_t n = z.shape()[0], d = z.shape()[1];
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw DimensionMismatch("one label per embedding row required");
  if (steps <= 0) throw InvalidConfig("probe steps must be positive");
  if (lr < 0.0) throw InvalidConfig("probe learning rate must be nonnegative");
  check_binary_labels(labels);

  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> w(static_cast<std::size_t>(d));
  for (auto& v : w) v = rng.uniform(-bound, bound);

  Probe probe;
  probe.params.push_back({"probe.weight", make_tensor({d, 1}, std::move(w), true)});
  probe.params.push_back({"probe.bias", make_zeros({1}, true)});

  OptimizerState opt = make_optimizer(lr);
  for (std::int64_t step = 0; step < steps; ++step) {
    Tensor loss =
        bce_with_logits_loss(linear_head(probe.params[0].value, probe.params[1].value, z), labels);
    backward(loss);
    adamw_step(probe.params, opt);
  }
  return probe;
}

std::vector<double> probe_scores(const Probe& probe, const Tensor& z) {
  const auto& w = probe.params[0].value;
  const auto& b = probe.params[1].value;
  if (z.shape().size() != 2 || z.shape()[1] != w.shape()[0])
    throw DimensionMismatch("embedding width does not match the probe");
  const std::int64_t n = z.shape()[0], d = z.shape()[1];
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double logit = b.values()[0];
    for (std::int64_t t = 0; t < d; ++t)
      logit += z.values()[static_cast<std::size_t>(i * d + t)] *
               w.values()[static_cast<std::size_t>(t)];
    scores[static_cast<std::size_t>(i)] = sigmoid(logit);
  }
  return scores;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw DimensionMismatch("one label per score required");
  check_binary_labels(labels);
  double wins = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

MetricsRecord classification_metrics(const std::vector<double>& scores,
                                     const std::vector<int>& labels, double threshold) {
  if (scores.size() != labels.size())
    throw DimensionMismatch("one label per score required");
  check_binary_labels(labels);
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] > threshold;
    if (labels[i] == 1)
      (predicted ? tp : fn) += 1;
    else
      (predicted ? fp : tn) += 1;
  }
  MetricsRecord rec;
  rec.auc = roc_auc(scores, labels);
  rec.accuracy = static_cast<double>(tp + tn) / static_cast<double>(scores.size());
  rec.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
  rec.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
  const double denom = static_cast<double>(2 * tp + fp + fn);
  rec.f1 = denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
  return rec;
}

std::vector<std::int64_t> stratified_folds(const std::vector<int>& labels, std::int64_t k,
                                           std::uint64_t seed) {
  if (k < 2) throw InvalidConfig("cross-validation needs at least two folds");
  const auto n = static_cast<std::int64_t>(labels.size());
  if (n < k) throw InvalidConfig("fewer samples than folds");
  check_binary_labels(labels);

  std::vector<std::int64_t> by_class[2];
  for (std::int64_t i = 0; i < n; ++i)
    by_class[labels[static_cast<std::size_t>(i)]].push_back(i);
  if (static_cast<std::int64_t>(by_class[0].size()) < k ||
      static_cast<std::int64_t>(by_class[1].size()) < k)
    throw FoldDegenerate("every test fold needs both classes");

  // shuffle each class, deal round-robin so folds stay stratified
  std::vector<std::int64_t> fold_of(static_cast<std::size_t>(n));
  for (int c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(11 + 2 * c)));
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(
                                0, static_cast<std::int64_t>(i) - 1))]);
    for (std::size_t i = 0; i < idx.size(); ++i)
      fold_of[static_cast<std::size_t>(idx[i])] = static_cast<std::int64_t>(i) % k;
  }
  return fold_of;
}

std::vector<MetricsRecord> kfold_cv(const Tensor& z, const std::vector<int>& labels,
                                    std::int64_t k, std::uint64_t seed,
                                    std::int64_t probe_steps, double probe_lr) {
  if (z.shape().size() != 2) throw DimensionMismatch("embeddings must be an [n,d] matrix");
  const std::int64_t n = z.shape()[0], d = z.shape()[1];
  if (static_cast<std::int64_t>(labels.size()) != n)
    throw DimensionMismatch("one label per embedding row required");
  const auto fold_of = stratified_folds(labels, k, seed);

  std::vector<MetricsRecord> records;
  records.reserve(static_cast<std::size_t>(k));
  for (std::int64_t fold = 0; fold < k; ++fold) {
    std::vector<double> z_train, z_test;
    std::vector<int> y_train;
    std::vector<int> y_test;
    for (std::int64_t i = 0; i < n; ++i) {
      const auto row = z.values().begin() + i * d;
      auto& dst = fold_of[static_cast<std::size_t>(i)] == fold ? z_test : z_train;
      dst.insert(dst.end(), row, row + d);
      (fold_of[static_cast<std::size_t>(i)] == fold ? y_test : y_train)
          .push_back(labels[static_cast<std::size_t>(i)]);
    }
    const Probe probe = train_linear_probe(
        make_tensor({static_cast<std::int64_t>(y_train.size()), d}, std::move(z_train)), y_train,
        probe_steps, probe_lr, mix_seed(seed, static_cast<std::uint64_t>(100 + fold)));
    const auto scores = probe_scores(
        probe, make_tensor({static_cast<std::int64_t>(y_test.size()), d}, std::move(z_test)));
    MetricsRecord rec = classification_metrics(scores, y_test);
    rec.fold = fold;
    records.push_back(rec);
  }
  return records;
}

namespace {

// regularized incomplete beta via the Lentz continued fraction
double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-14) break;
  }
  return h;
}

double betainc(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace

TTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("paired samples must have equal length");
  const auto k = static_cast<std::int64_t>(a.size());
  if (k < 2) throw InvalidConfig("paired test needs at least two pairs");

  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(k);
  double var = 0.0;
  for (double v : diff) var += (v - mean) * (v - mean);
  var /= static_cast<double>(k - 1);
  if (var == 0.0) throw ZeroVariance("differences carry no variance");

  TTest result;
  result.t = mean / std::sqrt(var / static_cast<double>(k));
  const double nu = static_cast<double>(k - 1);
  result.p = betainc(nu / 2.0, 0.5, nu / (nu + result.t * result.t));
  result.p = std::clamp(result.p, 0.0, 1.0);
  return result;
}

namespace {

// cyclic Jacobi eigendecomposition of a symmetric matrix; a is row-major and
// is destroyed, v receives eigenvectors in its columns
void jacobi_eigen(std::vector<double>& a, std::int64_t m, std::vector<double>& v) {
  v.assign(static_cast<std::size_t>(m * m), 0.0);
  for (std::int64_t i = 0; i < m; ++i) v[static_cast<std::size_t>(i * m + i)] = 1.0;
  double norm = 0.0;
  for (double x : a) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::int64_t p = 0; p < m; ++p)
      for (std::int64_t q = p + 1; q < m; ++q) {
        const double apq = a[static_cast<std::size_t>(p * m + q)];
        off += 2.0 * apq * apq;
      }
    if (std::sqrt(off) <= 1e-14 * norm) break;

    for (std::int64_t p = 0; p < m; ++p)
      for (std::int64_t q = p + 1; q < m; ++q) {
        const double apq = a[static_cast<std::size_t>(p * m + q)];
        if (apq == 0.0) continue;
        const double app = a[static_cast<std::size_t>(p * m + p)];
        const double aqq = a[static_cast<std::size_t>(q * m + q)];
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::int64_t i = 0; i < m; ++i) {
          const double aip = a[static_cast<std::size_t>(i * m + p)];
          const double aiq = a[static_cast<std::size_t>(i * m + q)];
          a[static_cast<std::size_t>(i * m + p)] = c * aip - s * aiq;
          a[static_cast<std::size_t>(i * m + q)] = s * aip + c * aiq;
        }
        for (std::int64_t i = 0; i < m; ++i) {
          const double api = a[static_cast<std::size_t>(p * m + i)];
          const double aqi = a[static_cast<std::size_t>(q * m + i)];
          a[static_cast<std::size_t>(p * m + i)] = c * api - s * aqi;
          a[static_cast<std::size_t>(q * m + i)] = s * api + c * aqi;
        }
        for (std::int64_t i = 0; i < m; ++i) {
          const double vip = v[static_cast<std::size_t>(i * m + p)];
          const double viq = v[static_cast<std::size_t>(i * m + q)];
          v[static_cast<std::size_t>(i * m + p)] = c * vip - s * viq;
          v[static_cast<std::size_t>(i * m + q)] = s * vip + c * viq;
        }
      }
  }
}

std::vector<std::int64_t> descending_order(const std::vector<double>& eigenvalues) {
  std::vector<std::int64_t> order(eigenvalues.size());
  std::iota(order.begin(), order.end(), std::int64_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t i, std::int64_t j) {
    return eigenvalues[static_cast<std::size_t>(i)] > eigenvalues[static_cast<std::size_t>(j)];
  });
  return order;
}

void fix_component_sign(std::vector<double>& components, std::int64_t k, std::int64_t d) {
  for (std::int64_t c = 0; c < k; ++c) {
    double lead = 0.0;
    for (std::int64_t j = 0; j < d; ++j) {
      const double v = components[static_cast<std::size_t>(c * d + j)];
      if (std::abs(v) > 1e-9) {
        lead = v;
        break;
      }
    }
    if (lead < 0.0)
      for (std::int64_t j = 0; j < d; ++j) components[static_cast<std::size_t>(c * d + j)] *= -1.0;
  }
}

}  // namespace

PCAResult pca(const Tensor& z, std::int64_t k) {
  if (z.shape().size() != 2) throw DimensionMismatch("embeddings must be an [n,d] matrix");
  const std::int64_t n = z.shape()[0], d = z.shape()[1];
  if (k < 1) throw InvalidConfig("need at least one component");
  if (n <= k) throw InvalidConfig("need more samples than components");
  if (k > d) throw RankDeficient("more components than embedding dimensions");

  std::vector<double> centered(z.values());
  for (std::int64_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < n; ++i) mean += centered[static_cast<std::size_t>(i * d + j)];
    mean /= static_cast<double>(n);
    for (std::int64_t i = 0; i < n; ++i) centered[static_cast<std::size_t>(i * d + j)] -= mean;
  }

  PCAResult result;
  result.n = n;
  result.d = d;
  result.k = k;
  result.components.assign(static_cast<std::size_t>(k * d), 0.0);
  result.explained_variance.assign(static_cast<std::size_t>(k), 0.0);

  if (d <= n) {
    // d x d scatter matrix
    std::vector<double> scatter(static_cast<std::size_t>(d * d), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t p = 0; p < d; ++p) {
        const double zp = centered[static_cast<std::size_t>(i * d + p)];
        for (std::int64_t q = p; q < d; ++q)
          scatter[static_cast<std::size_t>(p * d + q)] +=
              zp * centered[static_cast<std::size_t>(i * d + q)];
      }
    for (std::int64_t p = 0; p < d; ++p)
      for (std::int64_t q = 0; q < p; ++q)
        scatter[static_cast<std::size_t>(p * d + q)] = scatter[static_cast<std::size_t>(q * d + p)];

    std::vector<double> vecs;
    jacobi_eigen(scatter, d, vecs);
    std::vector<double> eigenvalues(static_cast<std::size_t>(d));
    for (std::int64_t i = 0; i < d; ++i)
      eigenvalues[static_cast<std::size_t>(i)] = scatter[static_cast<std::size_t>(i * d + i)];
    const auto order = descending_order(eigenvalues);
    for (std::int64_t c = 0; c < k; ++c) {
      const std::int64_t src = order[static_cast<std::size_t>(c)];
      result.explained_variance[static_cast<std::size_t>(c)] =
          std::max(eigenvalues[static_cast<std::size_t>(src)], 0.0) / static_cast<double>(n - 1);
      for (std::int64_t j = 0; j < d; ++j)
        result.components[static_cast<std::size_t>(c * d + j)] =
            vecs[static_cast<std::size_t>(j * d + src)];
    }
  } else {
    // Gram trick: eigenvectors u of Zc Zc^T give components Zc^T u / sqrt(mu)
    std::vector<double> gram(static_cast<std::size_t>(n * n), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = i; j < n; ++j) {
        double dot = 0.0;
        for (std::int64_t t = 0; t < d; ++t)
          dot += centered[static_cast<std::size_t>(i * d + t)] *
                 centered[static_cast<std::size_t>(j * d + t)];
        gram[static_cast<std::size_t>(i * n + j)] = dot;
        gram[static_cast<std::size_t>(j * n + i)] = dot;
      }
    std::vector<double> vecs;
    jacobi_eigen(gram, n, vecs);
    std::vector<double> eigenvalues(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
      eigenvalues[static_cast<std::size_t>(i)] = gram[static_cast<std::size_t>(i * n + i)];
    const auto order = descending_order(eigenvalues);

    const double rank_floor = std::max(eigenvalues[static_cast<std::size_t>(order[0])], 0.0) * 1e-12;
    for (std::int64_t c = 0; c < k; ++c) {
      const std::int64_t src = order[static_cast<std::size_t>(c)];
      const double mu = eigenvalues[static_cast<std::size_t>(src)];
      if (mu <= rank_floor)
        throw RankDeficient("component " + std::to_string(c + 1) +
                            " exceeds the rank of the data");
      result.explained_variance[static_cast<std::size_t>(c)] = mu / static_cast<double>(n - 1);
      const double inv = 1.0 / std::sqrt(mu);
      for (std::int64_t j = 0; j < d; ++j) {
        double dot = 0.0;
        for (std::int64_t i = 0; i < n; ++i)
          dot += centered[static_cast<std::size_t>(i * d + j)] *
                 vecs[static_cast<std::size_t>(i * n + src)];
        result.components[static_cast<std::size_t>(c * d + j)] = dot * inv;
      }
    }
    // re-orthonormalize: the division by sqrt(mu) amplifies roundoff on the
    // smaller eigenvalues
    for (std::int64_t c = 0; c < k; ++c) {
      auto* row = result.components.data() + c * d;
      for (std::int64_t prev = 0; prev < c; ++prev) {
        const auto* other = result.components.data() + prev * d;
        double dot = 0.0;
        for (std::int64_t j = 0; j < d; ++j) dot += row[j] * other[j];
        for (std::int64_t j = 0; j < d; ++j) row[j] -= dot * other[j];
      }
      double norm = 0.0;
      for (std::int64_t j = 0; j < d; ++j) norm += row[j] * row[j];
      norm = std::sqrt(norm);
      for (std::int64_t j = 0; j < d; ++j) row[j] /= norm;
    }
  }

  fix_component_sign(result.components, k, d);
  result.projections.assign(static_cast<std::size_t>(n * k), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t c = 0; c < k; ++c) {
      double dot = 0.0;
      for (std::int64_t j = 0; j < d; ++j)
        dot += centered[static_cast<std::size_t>(i * d + j)] *
               result.components[static_cast<std::size_t>(c * d + j)];
      result.projections[static_cast<std::size_t>(i * k + c)] = dot;
    }
  return result;
}

std::vector<double> spatial_correlation(const std::vector<double>& projections, std::int64_t n,
                                        std::int64_t k,
                                        const std::vector<std::array<double, 3>>& centers) {
  if (static_cast<std::int64_t>(projections.size()) != n * k)
    throw DimensionMismatch("projection matrix does not match its declared shape");
  if (static_cast<std::int64_t>(centers.size()) != n)
    throw DimensionMismatch("one center per projection row required");
  if (n < 3) throw InvalidConfig("correlation needs at least three samples");

  auto column_stats = [n](auto&& get) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < n; ++i) mean += get(i);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double c = get(i) - mean;
      var += c * c;
    }
    return std::pair<double, double>{mean, var};
  };

  std::vector<std::pair<double, double>> pc_stats, axis_stats;
  for (std::int64_t c = 0; c < k; ++c) {
    pc_stats.push_back(column_stats([&](std::int64_t i) {
      return projections[static_cast<std::size_t>(i * k + c)];
    }));
    if (pc_stats.back().second == 0.0)
      throw ZeroVariance("projection column " + std::to_string(c + 1) + " is constant");
  }
  for (int axis = 0; axis < 3; ++axis) {
    axis_stats.push_back(column_stats([&](std::int64_t i) {
      return centers[static_cast<std::size_t>(i)][static_cast<std::size_t>(axis)];
    }));
    if (axis_stats.back().second == 0.0)
      throw ZeroVariance("spatial axis " + std::to_string(axis) + " is constant");
  }

  std::vector<double> corr(static_cast<std::size_t>(k * 3));
  for (std::int64_t c = 0; c < k; ++c)
    for (int axis = 0; axis < 3; ++axis) {
      double cov = 0.0;
      for (std::int64_t i = 0; i < n; ++i)
        cov += (projections[static_cast<std::size_t>(i * k + c)] -
                pc_stats[static_cast<std::size_t>(c)].first) *
               (centers[static_cast<std::size_t>(i)][static_cast<std::size_t>(axis)] -
                axis_stats[static_cast<std::size_t>(axis)].first);
      const double denom = std::sqrt(pc_stats[static_cast<std::size_t>(c)].second *
                                     axis_stats[static_cast<std::size_t>(axis)].second);
      corr[static_cast<std::size_t>(c * 3 + axis)] = std::clamp(cov / denom, -1.0, 1.0);
    }
  return corr;
}

DistanceErrorStats distance_error_stats(const DistanceMatrix& d_latent,
                                        const DistanceMatrix& d_physical) {
  if (d_latent.n != d_physical.n)
    throw DimensionMismatch("latent and physical distance matrices disagree in size");
  const std::int64_t n = d_latent.n;
  if (n < 2) throw DimensionMismatch("need at least one pair of patches");

  std::vector<double> errors;
  errors.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j)
      errors.push_back(std::abs(d_latent.at(i, j) - d_physical.at(i, j)));
  std::sort(errors.begin(), errors.end());

  auto quantile = [&](double percent) {
    const double pos = percent / 100.0 * static_cast<double>(errors.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, errors.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return errors[lo] + frac * (errors[hi] - errors[lo]);
  };
  return DistanceErrorStats{quantile(5.0), quantile(25.0), quantile(50.0), quantile(75.0),
                            quantile(95.0)};
}

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_for_writing(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_metrics_csv(const std::vector<LabeledMetrics>& rows,
                       const std::filesystem::path& path) {
  auto out = open_for_writing(path);
  out << "model,fold,auc,accuracy,f1,sensitivity,specificity\n";
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    out << row.model << ',' << m.fold << ',' << format_real(m.auc) << ','
        << format_real(m.accuracy) << ',' << format_real(m.f1) << ','
        << format_real(m.sensitivity) << ',' << format_real(m.specificity) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_quantiles_csv(const DistanceErrorStats& stats, const std::filesystem::path& path) {
  auto out = open_for_writing(path);
  out << "percentile,abs_distance_error\n";
  const std::pair<int, double> rows[] = {
      {5, stats.q05}, {25, stats.q25}, {50, stats.q50}, {75, stats.q75}, {95, stats.q95}};
  for (const auto& [percentile, value] : rows)
    out << percentile << ',' << format_real(value) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_correlation_csv(const std::vector<double>& correlations, std::int64_t k,
                           const std::filesystem::path& path) {
  if (static_cast<std::int64_t>(correlations.size()) != k * 3)
    throw DimensionMismatch("correlation matrix does not match its declared shape");
  auto out = open_for_writing(path);
  out << "component,axis0,axis1,axis2\n";
  for (std::int64_t c = 0; c < k; ++c)
    out << (c + 1) << ',' << format_real(correlations[static_cast<std::size_t>(c * 3)]) << ','
        << format_real(correlations[static_cast<std::size_t>(c * 3 + 1)]) << ','
        << format_real(correlations[static_cast<std::size_t>(c * 3 + 2)]) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

void write_projection_svg(const std::vector<double>& projections, std::int64_t n, std::int64_t k,
                          const std::vector<std::array<double, 3>>& centers,
                          const std::filesystem::path& path) {
  if (static_cast<std::int64_t>(projections.size()) != n * k)
    throw DimensionMismatch("projection matrix does not match its declared shape");
  if (static_cast<std::int64_t>(centers.size()) != n)
    throw DimensionMismatch("one center per projection row required");

  const double panel = 180.0, pad = 40.0, dot = 2.0;
  const double width = 3 * (panel + pad) + pad;
  const double height = static_cast<double>(k) * (panel + pad) + pad;

  auto out = open_for_writing(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::int64_t c = 0; c < k; ++c)
    for (int axis = 0; axis < 3; ++axis) {
      const double x0 = pad + axis * (panel + pad);
      const double y0 = pad + static_cast<double>(c) * (panel + pad);
      double xmin = centers[0][static_cast<std::size_t>(axis)], xmax = xmin;
      double ymin = projections[static_cast<std::size_t>(c)], ymax = ymin;
      for (std::int64_t i = 0; i < n; ++i) {
        const double x = centers[static_cast<std::size_t>(i)][static_cast<std::size_t>(axis)];
        const double y = projections[static_cast<std::size_t>(i * k + c)];
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
      const double xspan = xmax > xmin ? xmax - xmin : 1.0;
      const double yspan = ymax > ymin ? ymax - ymin : 1.0;
      out << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << panel << "\" height=\""
          << panel << "\" fill=\"none\" stroke=\"black\"/>\n";
      out << "<text x=\"" << x0 << "\" y=\"" << y0 - 6.0 << "\" font-size=\"12\">pc" << (c + 1)
          << " vs axis" << axis << "</text>\n";
      for (std::int64_t i = 0; i < n; ++i) {
        const double x = centers[static_cast<std::size_t>(i)][static_cast<std::size_t>(axis)];
        const double y = projections[static_cast<std::size_t>(i * k + c)];
        out << "<circle cx=\"" << x0 + (x - xmin) / xspan * panel << "\" cy=\""
            << y0 + panel - (y - ymin) / yspan * panel << "\" r=\"" << dot
            << "\" fill=\"steelblue\" fill-opacity=\"0.6\"/>\n";
      }
    }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace isilab
