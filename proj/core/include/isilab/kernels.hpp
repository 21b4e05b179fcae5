#pragma once

#include <cstdint>

namespace isilab::kernels {

// Dense GEMM over row-major contiguous matrices, accumulating into c.
// gemm_nn: c[m,n] += a[m,k] * b[k,n]
// gemm_tn: c[m,n] += sum_r a[r,m] * b[r,n]   (a is [k,m])
// gemm_nt: c[m,n] += sum_r a[m,r] * b[n,r]   (b is [n,k])
void gemm_nn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c);
void gemm_tn(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c);
void gemm_nt(std::int64_t m, std::int64_t n, std::int64_t k, const double* a, const double* b,
             double* c);

// 3x3x3 convolution, stride 1, on channels-last tensors. The input is
// pre-padded by one voxel on every spatial face: in is [n, d+2, h+2, w+2, ci],
// out is [n, d, h, w, co], weights are [3,3,3, ci, co], bias is [co].
void conv3d_fwd(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d, std::int64_t h,
                std::int64_t w, const double* in, const double* weights, const double* bias,
                double* out);

// accumulates into gin (padded layout, same extents as in)
void conv3d_bwd_input(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d,
                      std::int64_t h, std::int64_t w, const double* gout, const double* weights,
                      double* gin);

// accumulates into gweights [3,3,3, ci, co] and gbias [co]
void conv3d_bwd_weight(std::int64_t n, std::int64_t ci, std::int64_t co, std::int64_t d,
                       std::int64_t h, std::int64_t w, const double* gout, const double* in,
                       double* gweights, double* gbias);

}  // namespace isilab::kernels
