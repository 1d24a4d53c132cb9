#pragma once

#include <cstddef>
#include <cstdint>

namespace icsad::kern {

// Arithmetic inner loops behind the tensor operations. The scalar kernels
// define the reference semantics; SIMD variants are selected at runtime and
// must produce bit-identical results, which the test suite enforces on
// random inputs.
//
// Rules that make bit-equality achievable:
//   * per output element, products are accumulated with fused multiply-add
//     in a fixed order (time/row index ascending); SIMD lanes span the
//     contiguous channel axis, never the accumulation axis;
//   * dot products (dense_bwd_input) accumulate into four interleaved
//     partials p[j % 4] and combine as (p0 + p2) + (p1 + p3), mirroring an
//     AVX2 horizontal reduction;
//   * plain reductions used for statistics stay scalar in ops code.
//
// Layouts: activations are row-major [time][channels] with channels
// contiguous; conv weights are [tap][channels]; dense weights are
// [in][out] with out contiguous.

struct Kernels {
    const char* name;

    // out[t][c] = bias[c] + sum_k xe[t*stride + k][c] * w[k][c]
    // xe is the channel-expanded input (C = output channel count).
    void (*conv_fwd)(const double* xe, std::size_t in_t, std::size_t c,
                     const double* w, const double* bias, std::size_t k,
                     std::size_t stride, double* out, std::size_t out_t);

    // gxe[t*stride + k][c] += gy[t][c] * w[k][c]; gxe must be zero-filled.
    void (*conv_bwd_input)(const double* gy, std::size_t out_t, std::size_t c,
                           const double* w, std::size_t k, std::size_t stride,
                           double* gxe, std::size_t in_t);

    // gw[k][c] += sum_t gy[t][c] * xe[t*stride + k][c];  gb[c] += sum_t gy[t][c]
    void (*conv_bwd_params)(const double* xe, std::size_t in_t, const double* gy,
                            std::size_t out_t, std::size_t c, std::size_t k,
                            std::size_t stride, double* gw, double* gb);

    // y[i][j] = b[j] + sum_k x[i][k] * w[k][j]   (x: [m,kk], w: [kk,n])
    void (*dense_fwd)(const double* x, std::size_t m, std::size_t kk,
                      const double* w, const double* b, double* y, std::size_t n);

    // gx[i][k] = dot4(gy[i][:], w[k][:])  over n
    void (*dense_bwd_input)(const double* gy, std::size_t m, std::size_t n,
                            const double* w, std::size_t kk, double* gx);

    // gw[k][j] += sum_i x[i][k] * gy[i][j];  gb[j] += sum_i gy[i][j]
    void (*dense_bwd_params)(const double* x, std::size_t m, std::size_t kk,
                             const double* gy, std::size_t n, double* gw, double* gb);

    // y[i] = max(x[i], 0)
    void (*relu_fwd)(const double* x, double* y, std::size_t n);

    // gx[i] = x[i] > 0 ? gy[i] : 0   (tie at exactly 0 passes nothing)
    void (*relu_bwd)(const double* x, const double* gy, double* gx, std::size_t n);

    // per-channel max over pooling windows; idx holds the absolute input
    // time index of each max, first index winning ties (strict >).
    void (*pool_fwd)(const double* x, std::size_t t, std::size_t c,
                     std::size_t pool, std::size_t stride, double* y,
                     std::int64_t* idx, std::size_t out_t);

    // gx[idx[t][c]][c] += gy[t][c]; gx must be zero-filled.
    void (*pool_bwd)(const double* gy, std::size_t out_t, std::size_t c,
                     const std::int64_t* idx, double* gx, std::size_t in_t);

    // y[i] = x[i] * m[i]
    void (*mul)(const double* x, const double* m, double* y, std::size_t n);

    // acc[c] += sum_t x[t][c], t ascending
    void (*colsum_acc)(const double* x, std::size_t t, std::size_t c, double* acc);

    // acc[c] += sum_t (x[t][c] - mean[c])^2, t ascending
    void (*colsq_acc)(const double* x, std::size_t t, std::size_t c,
                      const double* mean, double* acc);

    // y[t][c] = x[t][c] * scale[c] + shift[c]
    void (*affine_channels)(const double* x, std::size_t t, std::size_t c,
                            const double* scale, const double* shift, double* y);
};

const Kernels& scalar_kernels();

// nullptr when the build or the CPU lacks AVX2+FMA
const Kernels* avx2_kernels();

// Active table: AVX2 when available, else scalar. The ICSAD_KERNELS
// environment variable ("scalar" or "avx2") overrides, and force() does the
// same programmatically (tests use it).
const Kernels& active();
bool force(const char* name);

}  // namespace icsad::kern
