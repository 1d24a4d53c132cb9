#pragma once

// Buffer layout shims between the [time, feature] / [feature, filter, tap]
// tensors the API exposes and the channel-expanded, tap-major arrays the
// compute kernels consume. Shared by the op wrappers and the batched engine
// so both sides produce bit-identical geometry.

#include <cstddef>

namespace icsad::detail {

// x [T, F] row-major -> xe [T, F*M] with xe[t][f*M + m] = x[t][f].
inline void expand_channels(const double* x, std::size_t T, std::size_t F, std::size_t M,
                            double* xe) {
    const std::size_t C = F * M;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f) {
            const double v = x[t * F + f];
            double* dst = xe + t * C + f * M;
            for (std::size_t m = 0; m < M; ++m) dst[m] = v;
        }
}

// kernels [F, M, K] flat (channel c = f*M + m) -> tap-major wk [K, C].
inline void repack_taps(const double* kernels, std::size_t C, std::size_t K, double* wk) {
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t k = 0; k < K; ++k) wk[k * C + c] = kernels[c * K + k];
}

// Tap-major grads [K, C] back to kernel layout [C, K].
inline void unpack_taps(const double* gwk, std::size_t C, std::size_t K, double* gk) {
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t k = 0; k < K; ++k) gk[c * K + k] = gwk[k * C + c];
}

// gxe [T, F*M] -> gx [T, F], summing the M replicated channels in ascending
// order (fixed order keeps results identical across kernel tables).
inline void reduce_channels(const double* gxe, std::size_t T, std::size_t F, std::size_t M,
                            double* gx) {
    const std::size_t C = F * M;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < F; ++f) {
            const double* src = gxe + t * C + f * M;
            double acc = 0.0;
            for (std::size_t m = 0; m < M; ++m) acc += src[m];
            gx[t * F + f] = acc;
        }
}

}  // namespace icsad::detail
