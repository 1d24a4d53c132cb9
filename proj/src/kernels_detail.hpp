#pragma once

// Internal: scalar kernel entry points, shared so the AVX2 table can fall
// back to them for ops where SIMD does not pay (scatter-style updates).

#include <cstddef>
#include <cstdint>

namespace icsad::kern {
struct Kernels;
}

namespace icsad::kern::detail {

// Table compiled from kernels_avx2.cpp, or nullptr when that translation
// unit was built without AVX2+FMA support. CPU capability is checked by the
// dispatcher, not here.
const Kernels* avx2_table();

void sc_conv_fwd(const double* xe, std::size_t in_t, std::size_t c,
                 const double* w, const double* bias, std::size_t k,
                 std::size_t stride, double* out, std::size_t out_t);
void sc_conv_bwd_input(const double* gy, std::size_t out_t, std::size_t c,
                       const double* w, std::size_t k, std::size_t stride,
                       double* gxe, std::size_t in_t);
void sc_conv_bwd_params(const double* xe, std::size_t in_t, const double* gy,
                        std::size_t out_t, std::size_t c, std::size_t k,
                        std::size_t stride, double* gw, double* gb);
void sc_dense_fwd(const double* x, std::size_t m, std::size_t kk,
                  const double* w, const double* b, double* y, std::size_t n);
void sc_dense_bwd_input(const double* gy, std::size_t m, std::size_t n,
                        const double* w, std::size_t kk, double* gx);
void sc_dense_bwd_params(const double* x, std::size_t m, std::size_t kk,
                         const double* gy, std::size_t n, double* gw, double* gb);
void sc_relu_fwd(const double* x, double* y, std::size_t n);
void sc_relu_bwd(const double* x, const double* gy, double* gx, std::size_t n);
void sc_pool_fwd(const double* x, std::size_t t, std::size_t c,
                 std::size_t pool, std::size_t stride, double* y,
                 std::int64_t* idx, std::size_t out_t);
void sc_pool_bwd(const double* gy, std::size_t out_t, std::size_t c,
                 const std::int64_t* idx, double* gx, std::size_t in_t);
void sc_mul(const double* x, const double* m, double* y, std::size_t n);
void sc_colsum_acc(const double* x, std::size_t t, std::size_t c, double* acc);
void sc_colsq_acc(const double* x, std::size_t t, std::size_t c,
                  const double* mean, double* acc);
void sc_affine_channels(const double* x, std::size_t t, std::size_t c,
                        const double* scale, const double* shift, double* y);

}  // namespace icsad::kern::detail
