// Scalar reference kernels. These define the numeric semantics: every
// accumulation uses std::fma in a fixed order so the AVX2 variants (which
// vectorize across the channel axis and use vfmadd) reproduce results bit
// for bit. Keep the loop nests in sync with kernels_avx2.cpp.

#include "kernels_detail.hpp"

#include <cmath>

#include "icsad/kernels.hpp"

namespace icsad::kern::detail {

void sc_conv_fwd(const double* xe, std::size_t /*in_t*/, std::size_t c,
                 const double* w, const double* bias, std::size_t k,
                 std::size_t stride, double* out, std::size_t out_t) {
    for (std::size_t t = 0; t < out_t; ++t) {
        double* y = out + t * c;
        for (std::size_t j = 0; j < c; ++j) y[j] = bias[j];
        const double* xrow = xe + t * stride * c;
        for (std::size_t tap = 0; tap < k; ++tap) {
            const double* xr = xrow + tap * c;
            const double* wr = w + tap * c;
            for (std::size_t j = 0; j < c; ++j) y[j] = std::fma(xr[j], wr[j], y[j]);
        }
    }
}

void sc_conv_bwd_input(const double* gy, std::size_t out_t, std::size_t c,
                       const double* w, std::size_t k, std::size_t stride,
                       double* gxe, std::size_t /*in_t*/) {
    for (std::size_t t = 0; t < out_t; ++t) {
        const double* gr = gy + t * c;
        double* grow = gxe + t * stride * c;
        for (std::size_t tap = 0; tap < k; ++tap) {
            double* gx = grow + tap * c;
            const double* wr = w + tap * c;
            for (std::size_t j = 0; j < c; ++j) gx[j] = std::fma(gr[j], wr[j], gx[j]);
        }
    }
}

void sc_conv_bwd_params(const double* xe, std::size_t /*in_t*/, const double* gy,
                        std::size_t out_t, std::size_t c, std::size_t k,
                        std::size_t stride, double* gw, double* gb) {
    for (std::size_t tap = 0; tap < k; ++tap) {
        double* gwr = gw + tap * c;
        for (std::size_t t = 0; t < out_t; ++t) {
            const double* xr = xe + (t * stride + tap) * c;
            const double* gr = gy + t * c;
            for (std::size_t j = 0; j < c; ++j) gwr[j] = std::fma(xr[j], gr[j], gwr[j]);
        }
    }
    for (std::size_t t = 0; t < out_t; ++t) {
        const double* gr = gy + t * c;
        for (std::size_t j = 0; j < c; ++j) gb[j] += gr[j];
    }
}

void sc_dense_fwd(const double* x, std::size_t m, std::size_t kk,
                  const double* w, const double* b, double* y, std::size_t n) {
    // Row loop inside the input-unit loop: the weight matrix streams through
    // cache once per call instead of once per row. Each y[i][j] still
    // accumulates taps in ascending t order, so results are unchanged.
    for (std::size_t i = 0; i < m; ++i) {
        double* yi = y + i * n;
        for (std::size_t j = 0; j < n; ++j) yi[j] = b[j];
    }
    for (std::size_t t = 0; t < kk; ++t) {
        const double* wr = w + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double xv = x[i * kk + t];
            double* yi = y + i * n;
            for (std::size_t j = 0; j < n; ++j) yi[j] = std::fma(xv, wr[j], yi[j]);
        }
    }
}

void sc_dense_bwd_input(const double* gy, std::size_t m, std::size_t n,
                        const double* w, std::size_t kk, double* gx) {
    // Reduction runs along the contiguous axis, so it is split into four
    // interleaved partials combined as (p0+p2)+(p1+p3) — the same shape an
    // AVX2 horizontal add produces. Weight rows stay in cache across the row
    // loop (t outer), streaming w once per call.
    for (std::size_t t = 0; t < kk; ++t) {
        const double* wr = w + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double* gr = gy + i * n;
            double p[4] = {0.0, 0.0, 0.0, 0.0};
            for (std::size_t j = 0; j < n; ++j) p[j & 3] = std::fma(gr[j], wr[j], p[j & 3]);
            gx[i * kk + t] = (p[0] + p[2]) + (p[1] + p[3]);
        }
    }
}

void sc_dense_bwd_params(const double* x, std::size_t m, std::size_t kk,
                         const double* gy, std::size_t n, double* gw, double* gb) {
    // Row loop innermost so each gw row is touched once per call rather than
    // once per row; every gw[t][j] still sums rows in ascending i order.
    for (std::size_t t = 0; t < kk; ++t) {
        double* gwr = gw + t * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double xv = x[i * kk + t];
            const double* gr = gy + i * n;
            for (std::size_t j = 0; j < n; ++j) gwr[j] = std::fma(xv, gr[j], gwr[j]);
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* gr = gy + i * n;
        for (std::size_t j = 0; j < n; ++j) gb[j] += gr[j];
    }
}

void sc_relu_fwd(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void sc_relu_bwd(const double* x, const double* gy, double* gx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
}

void sc_pool_fwd(const double* x, std::size_t /*t*/, std::size_t c,
                 std::size_t pool, std::size_t stride, double* y,
                 std::int64_t* idx, std::size_t out_t) {
    for (std::size_t t = 0; t < out_t; ++t) {
        const std::size_t start = t * stride;
        for (std::size_t j = 0; j < c; ++j) {
            double best = x[start * c + j];
            std::int64_t bi = static_cast<std::int64_t>(start);
            for (std::size_t p = 1; p < pool; ++p) {
                const double v = x[(start + p) * c + j];
                if (v > best) {  // strict: first max wins ties
                    best = v;
                    bi = static_cast<std::int64_t>(start + p);
                }
            }
            y[t * c + j] = best;
            idx[t * c + j] = bi;
        }
    }
}

void sc_pool_bwd(const double* gy, std::size_t out_t, std::size_t c,
                 const std::int64_t* idx, double* gx, std::size_t /*in_t*/) {
    for (std::size_t t = 0; t < out_t; ++t)
        for (std::size_t j = 0; j < c; ++j)
            gx[static_cast<std::size_t>(idx[t * c + j]) * c + j] += gy[t * c + j];
}

void sc_mul(const double* x, const double* m, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * m[i];
}

void sc_colsum_acc(const double* x, std::size_t t, std::size_t c, double* acc) {
    for (std::size_t i = 0; i < t; ++i) {
        const double* row = x + i * c;
        for (std::size_t j = 0; j < c; ++j) acc[j] += row[j];
    }
}

void sc_colsq_acc(const double* x, std::size_t t, std::size_t c,
                  const double* mean, double* acc) {
    for (std::size_t i = 0; i < t; ++i) {
        const double* row = x + i * c;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = row[j] - mean[j];
            acc[j] = std::fma(d, d, acc[j]);
        }
    }
}

void sc_affine_channels(const double* x, std::size_t t, std::size_t c,
                        const double* scale, const double* shift, double* y) {
    for (std::size_t i = 0; i < t; ++i) {
        const double* row = x + i * c;
        double* out = y + i * c;
        for (std::size_t j = 0; j < c; ++j) out[j] = std::fma(row[j], scale[j], shift[j]);
    }
}

}  // namespace icsad::kern::detail

namespace icsad::kern {

const Kernels& scalar_kernels() {
    using namespace detail;
    static const Kernels k = {
        "scalar",
        sc_conv_fwd,  sc_conv_bwd_input,  sc_conv_bwd_params,
        sc_dense_fwd, sc_dense_bwd_input, sc_dense_bwd_params,
        sc_relu_fwd,  sc_relu_bwd,
        sc_pool_fwd,  sc_pool_bwd,
        sc_mul,       sc_colsum_acc,      sc_colsq_acc,
        sc_affine_channels,
    };
    return k;
}

}  // namespace icsad::kern
