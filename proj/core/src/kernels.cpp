#include "isilab/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace isilab::kernels {

namespace {

constexpr std::int64_t kGemmBlock = 64;

}  // namespace

void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c) {
  for (std::int64_t kb = 0; kb < k; kb += kGemmBlock) {
    const std::int64_t ke = std::min(k, kb + kGemmBlock);
    for (std::int64_t i = 0; i < m; ++i) {
      const double* __restrict arow = a + i * k;
      double* __restrict crow = c + i * n;
      for (std::int64_t r = kb; r < ke; ++r) {
        const double s = arow[r];
        const double* __restrict brow = b + r * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    }
  }
}

void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c) {
  for (std::int64_t kb = 0; kb < k; kb += kGemmBlock) {
    const std::int64_t ke = std::min(k, kb + kGemmBlock);
    for (std::int64_t i = 0; i < m; ++i) {
      double* __restrict crow = c + i * n;
      for (std::int64_t r = kb; r < ke; ++r) {
        const double s = a[r * m + i];
        const double* __restrict brow = b + r * n;
        for (std::int64_t j = 0; j < n; ++j) crow[j] += s * brow[j];
      }
    }
  }
}

void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* __restrict arow = a + i * k;
    double* __restrict crow = c + i * n;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* __restrict brow = b + j * k;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::int64_t r = 0;
      for (; r + 4 <= k; r += 4) {
        s0 += arow[r] * brow[r];
        s1 += arow[r + 1] * brow[r + 1];
        s2 += arow[r + 2] * brow[r + 2];
        s3 += arow[r + 3] * brow[r + 3];
      }
      for (; r < k; ++r) s0 += arow[r] * brow[r];
      crow[j] += (s0 + s1) + (s2 + s3);
    }
  }
}

namespace {

// Channels-last 3^3 convolution kernels. The channel loops are templated so
// the compiler sees fixed trip counts for the configurations that matter;
// everything else takes the generic path. Benchmarked on this codebase the
// templated bodies vectorize reliably where -funroll-loops style unrolling
// proved erratic.

template <int Ci, int Co>
void conv_fwd_t(std::int64_t n, std::int64_t d, std::int64_t h, std::int64_t w,
                const double* __restrict in, const double* __restrict weights,
                const double* __restrict bias, double* __restrict out) {
  const std::int64_t dp = d + 2, hp = h + 2, wp = w + 2;
  std::vector<double> rowbuf(static_cast<std::size_t>(w) * Co);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t z = 0; z < d; ++z)
      for (std::int64_t y = 0; y < h; ++y) {
        double* __restrict o = rowbuf.data();
        for (std::int64_t x = 0; x < w; ++x)
          for (int co = 0; co < Co; ++co) o[x * Co + co] = bias[co];
        for (int kz = 0; kz < 3; ++kz)
          for (int ky = 0; ky < 3; ++ky) {
            const double* __restrict irow =
                in + (((b * dp + z + kz) * hp + (y + ky)) * wp) * Ci;
            for (int kx = 0; kx < 3; ++kx) {
              const double* __restrict a = irow + kx * Ci;
              const double* __restrict wk = weights + ((kz * 3 + ky) * 3 + kx) * Ci * Co;
              for (std::int64_t x = 0; x < w; ++x) {
                const double* __restrict av = a + x * Ci;
                double* __restrict ov = o + x * Co;
                for (int ci = 0; ci < Ci; ++ci) {
                  const double s = av[ci];
                  const double* __restrict wrow = wk + ci * Co;
                  for (int co = 0; co < Co; ++co) ov[co] += s * wrow[co];
                }
              }
            }
          }
        std::memcpy(out + (((b * d + z) * h + y) * w) * Co, rowbuf.data(),
                    sizeof(double) * static_cast<std::size_t>(w) * Co);
      }
}

template <int Ci, int Co>
void conv_bwd_input_t(std::int64_t n, std::int64_t d, std::int64_t h, std::int64_t w,
                      const double* __restrict gout, const double* __restrict weights,
                      double* __restrict gin) {
  // transpose weights to [k][co][ci] so the inner loop runs over ci
  std::vector<double> wt(static_cast<std::size_t>(27) * Ci * Co);
  for (int k = 0; k < 27; ++k)
    for (int ci = 0; ci < Ci; ++ci)
      for (int co = 0; co < Co; ++co)
        wt[static_cast<std::size_t>(k * Co * Ci + co * Ci + ci)] =
            weights[static_cast<std::size_t>(k * Ci * Co + ci * Co + co)];
  const std::int64_t dp = d + 2, hp = h + 2, wp = w + 2;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t z = 0; z < d; ++z)
      for (std::int64_t y = 0; y < h; ++y) {
        const double* __restrict go = gout + (((b * d + z) * h + y) * w) * Co;
        for (int kz = 0; kz < 3; ++kz)
          for (int ky = 0; ky < 3; ++ky) {
            double* __restrict girow =
                gin + (((b * dp + z + kz) * hp + (y + ky)) * wp) * Ci;
            for (int kx = 0; kx < 3; ++kx) {
              double* __restrict gi = girow + kx * Ci;
              const double* __restrict wk = wt.data() + ((kz * 3 + ky) * 3 + kx) * Co * Ci;
              for (std::int64_t x = 0; x < w; ++x) {
                const double* __restrict gv = go + x * Co;
                double* __restrict giv = gi + x * Ci;
                for (int co = 0; co < Co; ++co) {
                  const double s = gv[co];
                  const double* __restrict wrow = wk + co * Ci;
                  for (int ci = 0; ci < Ci; ++ci) giv[ci] += s * wrow[ci];
                }
              }
            }
          }
      }
}

template <int Ci, int Co>
void conv_bwd_weight_t(std::int64_t n, std::int64_t d, std::int64_t h, std::int64_t w,
                       const double* __restrict gout, const double* __restrict in,
                       double* __restrict gweights) {
  const std::int64_t dp = d + 2, hp = h + 2, wp = w + 2;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t z = 0; z < d; ++z)
      for (std::int64_t y = 0; y < h; ++y) {
        const double* __restrict go = gout + (((b * d + z) * h + y) * w) * Co;
        for (int kz = 0; kz < 3; ++kz)
          for (int ky = 0; ky < 3; ++ky) {
            const double* __restrict irow =
                in + (((b * dp + z + kz) * hp + (y + ky)) * wp) * Ci;
            for (int kx = 0; kx < 3; ++kx) {
              const double* __restrict a = irow + kx * Ci;
              double* __restrict gwk = gweights + ((kz * 3 + ky) * 3 + kx) * Ci * Co;
              for (std::int64_t x = 0; x < w; ++x) {
                const double* __restrict av = a + x * Ci;
                const double* __restrict gv = go + x * Co;
                for (int ci = 0; ci < Ci; ++ci) {
                  const double s = av[ci];
                  double* __restrict gwrow = gwk + ci * Co;
                  for (int co = 0; co < Co; ++co) gwrow[co] += s * gv[co];
                }
              }
            }
          }
      }
}

void conv_fwd_generic(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d,
                      std::int64_t h, std::int64_t w, const double* __restrict in,
                      const double* __restrict weights, const double* __restrict bias,
                      double* __restrict out) {
  const std::int64_t dp = d + 2, hp = h + 2, wp = w + 2;
  std::vector<double> rowbuf(static_cast<std::size_t>(w * co));
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t z = 0; z < d; ++z)
      for (std::int64_t y = 0; y < h; ++y) {
        double* __restrict o = rowbuf.data();
        for (std::int64_t x = 0; x < w; ++x)
          for (std::int64_t c = 0; c < co; ++c) o[x * co + c] = bias[c];
        for (int kz = 0; kz < 3; ++kz)
          for (int ky = 0; ky < 3; ++ky) {
            const double* __restrict irow =
                in + (((b * dp + z + kz) * hp + (y + ky)) * wp) * ci;
            for (int kx = 0; kx < 3; ++kx) {
              const double* __restrict a = irow + kx * ci;
              const double* __restrict wk = weights + ((kz * 3 + ky) * 3 + kx) * ci * co;
              for (std::int64_t x = 0; x < w; ++x) {
                const double* __restrict av = a + x * ci;
                double* __restrict ov = o + x * co;
                for (std::int64_t c = 0; c < ci; ++c) {
                  const double s = av[c];
                  const double* __restrict wrow = wk + c * co;
                  for (std::int64_t q = 0; q < co; ++q) ov[q] += s * wrow[q];
                }
              }
            }
          }
        std::memcpy(out + (((b * d + z) * h + y) * w) * co, rowbuf.data(),
                    sizeof(double) * static_cast<std::size_t>(w * co));
      }
}

void conv_bwd_input_generic(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d,
                            std::int64_t h, std::int64_t w, const double* __restrict gout,
                            const double* __restrict weights, double* __restrict gin) {
  std::vector<double> wt(static_cast<std::size_t>(27 * ci * co));
  for (int k = 0; k < 27; ++k)
    for (std::int64_t a = 0; a < ci; ++a)
      for (std::int64_t q = 0; q < co; ++q)
        wt[static_cast<std::size_t>(k * co * ci + q * ci + a)] =
            weights[static_cast<std::size_t>(k * ci * co + a * co + q)];
  const std::int64_t dp = d + 2, hp = h + 2, wp = w + 2;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t z = 0; z < d; ++z)
      for (std::int64_t y = 0; y < h; ++y) {
        const double* __restrict go = gout + (((b * d + z) * h + y) * w) * co;
        for (int kz = 0; kz < 3; ++kz)
          for (int ky = 0; ky < 3; ++ky) {
            double* __restrict girow =
                gin + (((b * dp + z + kz) * hp + (y + ky)) * wp) * ci;
            for (int kx = 0; kx < 3; ++kx) {
              double* __restrict gi = girow + kx * ci;
              const double* __restrict wk = wt.data() + ((kz * 3 + ky) * 3 + kx) * co * ci;
              for (std::int64_t x = 0; x < w; ++x) {
                const double* __restrict gv = go + x * co;
                double* __restrict giv = gi + x * ci;
                for (std::int64_t q = 0; q < co; ++q) {
                  const double s = gv[q];
                  const double* __restrict wrow = wk + q * ci;
                  for (std::int64_t c = 0; c < ci; ++c) giv[c] += s * wrow[c];
                }
              }
            }
          }
      }
}

void conv_bwd_weight_generic(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d,
                             std::int64_t h, std::int64_t w, const double* __restrict gout,
                             const double* __restrict in, double* __restrict gweights) {
  const std::int64_t dp = d + 2, hp = h + 2, wp = w + 2;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t z = 0; z < d; ++z)
      for (std::int64_t y = 0; y < h; ++y) {
        const double* __restrict go = gout + (((b * d + z) * h + y) * w) * co;
        for (int kz = 0; kz < 3; ++kz)
          for (int ky = 0; ky < 3; ++ky) {
            const double* __restrict irow =
                in + (((b * dp + z + kz) * hp + (y + ky)) * wp) * ci;
            for (int kx = 0; kx < 3; ++kx) {
              const double* __restrict a = irow + kx * ci;
              double* __restrict gwk = gweights + ((kz * 3 + ky) * 3 + kx) * ci * co;
              for (std::int64_t x = 0; x < w; ++x) {
                const double* __restrict av = a + x * ci;
                const double* __restrict gv = go + x * co;
                for (std::int64_t c = 0; c < ci; ++c) {
                  const double s = av[c];
                  double* __restrict gwrow = gwk + c * co;
                  for (std::int64_t q = 0; q < co; ++q) gwrow[q] += s * gv[q];
                }
              }
            }
          }
      }
}

using FwdFn = void (*)(std::int64_t, std::int64_t, std::int64_t, std::int64_t, const double*,
                       const double*, const double*, double*);
using BwdInFn = void (*)(std::int64_t, std::int64_t, std::int64_t, std::int64_t, const double*,
                         const double*, double*);
using BwdWFn = void (*)(std::int64_t, std::int64_t, std::int64_t, std::int64_t, const double*,
                        const double*, double*);

struct ChannelEntry {
  int ci, co;
  FwdFn fwd;
  BwdInFn bwd_in;
  BwdWFn bwd_w;
};

template <int Ci, int Co>
constexpr ChannelEntry entry() {
  return {Ci, Co, conv_fwd_t<Ci, Co>, conv_bwd_input_t<Ci, Co>, conv_bwd_weight_t<Ci, Co>};
}

// channel pairs of the default [8,16,32] and desk [4,8,16] encoders
constexpr ChannelEntry kChannelTable[] = {
    entry<1, 4>(), entry<4, 8>(), entry<8, 16>(), entry<1, 8>(), entry<16, 32>(),
};

const ChannelEntry* find_entry(std::int64_t ci, std::int64_t co) {
  for (const auto& e : kChannelTable)
    if (e.ci == ci && e.co == co) return &e;
  return nullptr;
}

}  // namespace

void conv3d_fwd(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d, std::int64_t h,
                std::int64_t w, const double* in, const double* weights, const double* bias,
                double* out) {
  if (const auto* e = find_entry(ci, co))
    e->fwd(n, d, h, w, in, weights, bias, out);
  else
    conv_fwd_generic(n, ci, co, d, h, w, in, weights, bias, out);
}

void conv3d_bwd_input(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d,
                      std::int64_t h, std::int64_t w, const double* gout, const double* weights,
                      double* gin) {
  if (const auto* e = find_entry(ci, co))
    e->bwd_in(n, d, h, w, gout, weights, gin);
  else
    conv_bwd_input_generic(n, ci, co, d, h, w, gout, weights, gin);
}

void conv3d_bwd_weight(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d,
                       std::int64_t h, std::int64_t w, const double* gout, const double* in,
                       double* gweights, double* gbias) {
  if (const auto* e = find_entry(ci, co))
    e->bwd_w(n, d, h, w, gout, in, gweights);
  else
    conv_bwd_weight_generic(n, ci, co, d, h, w, gout, in, gweights);
  const std::int64_t rows = n * d * h * w;
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* __restrict gv = gout + r * co;
    for (std::int64_t q = 0; q < co; ++q) gbias[q] += gv[q];
  }
}

}  // namespace isilab::kernels
