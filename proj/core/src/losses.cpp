#include "isilab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "isilab/errors.hpp"
#include "isilab/kernels.hpp"

namespace isilab {

void validate(const LossConfig& config) {
  if (config.tau <= 0.0) throw InvalidConfig("tau must be positive");
  if (config.lambda_bt < 0.0) throw InvalidConfig("lambda_bt must be nonnegative");
  if (config.lambda_scale < 0.0) throw InvalidConfig("lambda_scale must be nonnegative");
}

DistanceMatrix to_distance_matrix(const Tensor& d) {
  if (d.shape().size() != 2 || d.shape()[0] != d.shape()[1])
    throw DimensionMismatch("distance tensor must be square");
  DistanceMatrix m;
  m.n = d.shape()[0];
  m.values = d.values();
  return m;
}

Tensor isimed_loss(const Tensor& d_latent, const DistanceMatrix& d_physical) {
  if (d_latent.shape().size() != 2 || d_latent.shape()[0] != d_latent.shape()[1])
    throw DimensionMismatch("latent distance matrix must be square");
  const std::int64_t n = d_latent.shape()[0];
  if (n != d_physical.n)
    throw DimensionMismatch("latent and physical distance matrices disagree in size");
  if (n < 2) throw DimensionMismatch("distance regression needs at least two patches");

  const double inv_pairs = 2.0 / static_cast<double>(n * (n - 1));
  double loss = 0.0;
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double diff = d_latent.values()[i * n + j] - d_physical.at(i, j);
      loss += diff * diff;
    }
  loss *= inv_pairs;

  auto pd = d_latent.node;
  auto physical = d_physical.values;  // captured copy; the matrix is a constant here
  return make_op("isimed_loss", {1}, {loss}, {d_latent},
                 [pd, physical = std::move(physical), n, inv_pairs](TensorNode& self) {
                   pd->ensure_grad();
                   const double g = self.grad[0];
                   for (std::int64_t i = 0; i < n; ++i)
                     for (std::int64_t j = i + 1; j < n; ++j) {
                       const double diff = pd->values[i * n + j] - physical[i * n + j];
                       pd->grad[i * n + j] += g * 2.0 * diff * inv_pairs;
                     }
                 });
}

namespace {

// anchors are the stacked rows of both normalized views; row a pairs with
// row (a + n) mod 2n
void ntxent_grad_matrix(const std::vector<double>& u, std::int64_t m, std::int64_t d, double tau,
                        std::vector<double>& g) {
  std::vector<double> sims(static_cast<std::size_t>(m));
  const std::int64_t n = m / 2;
  for (std::int64_t a = 0; a < m; ++a) {
    const std::int64_t pos = (a + n) % m;
    double max_sim = -std::numeric_limits<double>::infinity();
    for (std::int64_t b = 0; b < m; ++b) {
      if (b == a) continue;
      double dot = 0.0;
      for (std::int64_t t = 0; t < d; ++t) dot += u[a * d + t] * u[b * d + t];
      sims[static_cast<std::size_t>(b)] = dot / tau;
      max_sim = std::max(max_sim, sims[static_cast<std::size_t>(b)]);
    }
    double denom = 0.0;
    for (std::int64_t b = 0; b < m; ++b)
      if (b != a) denom += std::exp(sims[static_cast<std::size_t>(b)] - max_sim);
    for (std::int64_t b = 0; b < m; ++b) {
      if (b == a) continue;
      const double softmax = std::exp(sims[static_cast<std::size_t>(b)] - max_sim) / denom;
      g[a * m + b] = (softmax - (b == pos ? 1.0 : 0.0)) / static_cast<double>(m);
    }
  }
}

}  // namespace

Tensor ntxent_loss(const Tensor& z1, const Tensor& z2, double tau) {
  if (tau <= 0.0) throw InvalidConfig("tau must be positive");
  if (z1.shape().size() != 2 || z1.shape() != z2.shape())
    throw ShapeMismatch("both views must be [n,d] matrices of equal shape");
  const std::int64_t n = z1.shape()[0], d = z1.shape()[1];
  if (n < 2) throw DimensionMismatch("contrastive loss needs at least two pairs");

  Tensor u1 = normalize_rows(z1);
  Tensor u2 = normalize_rows(z2);
  const std::int64_t m = 2 * n;
  std::vector<double> u(static_cast<std::size_t>(m * d));
  std::copy(u1.values().begin(), u1.values().end(), u.begin());
  std::copy(u2.values().begin(), u2.values().end(), u.begin() + n * d);

  double loss = 0.0;
  {
    std::vector<double> sims(static_cast<std::size_t>(m));
    for (std::int64_t a = 0; a < m; ++a) {
      const std::int64_t pos = (a + n) % m;
      double max_sim = -std::numeric_limits<double>::infinity();
      for (std::int64_t b = 0; b < m; ++b) {
        if (b == a) continue;
        double dot = 0.0;
        for (std::int64_t t = 0; t < d; ++t) dot += u[a * d + t] * u[b * d + t];
        sims[static_cast<std::size_t>(b)] = dot / tau;
        max_sim = std::max(max_sim, sims[static_cast<std::size_t>(b)]);
      }
      double denom = 0.0;
      for (std::int64_t b = 0; b < m; ++b)
        if (b != a) denom += std::exp(sims[static_cast<std::size_t>(b)] - max_sim);
      loss += max_sim + std::log(denom) - sims[static_cast<std::size_t>(pos)];
    }
    loss /= static_cast<double>(m);
  }

  auto p1 = u1.node, p2 = u2.node;
  return make_op(
      "ntxent_loss", {1}, {loss}, {u1, u2}, [p1, p2, n, d, tau](TensorNode& self) {
        const std::int64_t m = 2 * n;
        std::vector<double> u(static_cast<std::size_t>(m * d));
        std::copy(p1->values.begin(), p1->values.end(), u.begin());
        std::copy(p2->values.begin(), p2->values.end(), u.begin() + n * d);
        std::vector<double> g(static_cast<std::size_t>(m * m), 0.0);
        ntxent_grad_matrix(u, m, d, tau, g);
        // S = U U^T / tau with zero diagonal, so dU = (G + G^T) U / tau
        const double upstream = self.grad[0];
        std::vector<double> sym(static_cast<std::size_t>(m * m));
        for (std::int64_t a = 0; a < m; ++a)
          for (std::int64_t b = 0; b < m; ++b)
            sym[a * m + b] = (g[a * m + b] + g[b * m + a]) * upstream / tau;
        std::vector<double> du(static_cast<std::size_t>(m * d), 0.0);
        kernels::gemm_nn(m, d, m, sym.data(), u.data(), du.data());
        p1->ensure_grad();
        p2->ensure_grad();
        for (std::int64_t i = 0; i < n * d; ++i) {
          p1->grad[i] += du[i];
          p2->grad[i] += du[n * d + i];
        }
      });
}

Tensor barlow_twins_loss(const Tensor& z1, const Tensor& z2, double lambda_bt) {
  if (lambda_bt < 0.0) throw InvalidConfig("lambda_bt must be nonnegative");
  if (z1.shape().size() != 2 || z1.shape() != z2.shape())
    throw ShapeMismatch("both views must be [n,d] matrices of equal shape");
  const std::int64_t n = z1.shape()[0], d = z1.shape()[1];
  if (n < 2) throw DimensionMismatch("cross-correlation needs at least two rows");

  Tensor s1 = standardize_columns(z1);
  Tensor s2 = standardize_columns(z2);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> c(static_cast<std::size_t>(d * d), 0.0);
  kernels::gemm_tn(d, d, n, s1.values().data(), s2.values().data(), c.data());
  for (auto& v : c) v *= inv_n;

  double loss = 0.0;
  for (std::int64_t i = 0; i < d; ++i)
    for (std::int64_t j = 0; j < d; ++j) {
      if (i == j) {
        const double diff = 1.0 - c[i * d + i];
        loss += diff * diff;
      } else {
        loss += lambda_bt * c[i * d + j] * c[i * d + j];
      }
    }

  auto p1 = s1.node, p2 = s2.node;
  return make_op("barlow_twins_loss", {1}, {loss}, {s1, s2},
                 [p1, p2, n, d, lambda_bt, inv_n, c = std::move(c)](TensorNode& self) {
                   const double upstream = self.grad[0];
                   std::vector<double> g(static_cast<std::size_t>(d * d));
                   for (std::int64_t i = 0; i < d; ++i)
                     for (std::int64_t j = 0; j < d; ++j)
                       g[i * d + j] = upstream * inv_n *
                                      (i == j ? -2.0 * (1.0 - c[i * d + i])
                                              : 2.0 * lambda_bt * c[i * d + j]);
                   p1->ensure_grad();
                   p2->ensure_grad();
                   kernels::gemm_nt(n, d, d, p2->values.data(), g.data(), p1->grad.data());
                   kernels::gemm_nn(n, d, d, p1->values.data(), g.data(), p2->grad.data());
                 });
}

Tensor reg_isimed_loss(const Model& model, const Tensor& backbone1, const Tensor& backbone2,
                       const DistanceMatrix& d_physical, const LossConfig& config) {
  validate(config);
  Tensor h1 = linear_head(model.param("head_isimed.weight"), model.param("head_isimed.bias"),
                          backbone1);
  Tensor h2 = linear_head(model.param("head_isimed.weight"), model.param("head_isimed.bias"),
                          backbone2);
  Tensor isi = scale(add(isimed_loss(pairwise_distance(h1), d_physical),
                         isimed_loss(pairwise_distance(h2), d_physical)),
                     0.5);
  Tensor w1 = linear_head(model.param("head_barlow.weight"), model.param("head_barlow.bias"),
                          backbone1);
  Tensor w2 = linear_head(model.param("head_barlow.weight"), model.param("head_barlow.bias"),
                          backbone2);
  return add(isi, scale(barlow_twins_loss(w1, w2, config.lambda_bt), config.lambda_scale));
}

}  // namespace isilab
