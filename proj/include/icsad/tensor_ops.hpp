#pragma once

// Layer-level tensor operations with exact hand-derived gradients. Each op
// validates shapes (DimensionError names the offending axis), repacks into
// the channel-contiguous layout the kernels expect, and dispatches through
// the active kernel table. All ops are pure: rng state is passed in
// explicitly and tensors are taken by const reference.

#include <cstdint>
#include <vector>

#include "icsad/rng.hpp"
#include "icsad/tensor.hpp"

namespace icsad::ops {

struct ConvSpec {
    std::size_t kernel_size = 2;         // taps along time
    std::size_t filters_per_feature = 1; // channel multiplier
    std::size_t stride = 1;
};

inline std::size_t conv_out_time(std::size_t time, const ConvSpec& s) {
    return (time - s.kernel_size) / s.stride + 1;
}

// Depthwise 1D valid cross-correlation: input [time, features], kernels
// [features, filters_per_feature, kernel_size], bias [features*fpf].
// Output [out_time, features*fpf]; channel (f, k) maps to index f*fpf + k,
// and depends only on input feature f (no cross-feature mixing).
Tensor conv1d_depthwise(const Tensor& input, const ConvSpec& spec,
                        const Tensor& kernels, const Tensor& bias);

struct ConvGrads {
    Tensor grad_input, grad_kernels, grad_bias;
};
ConvGrads conv1d_depthwise_grad(const Tensor& input, const ConvSpec& spec,
                                const Tensor& kernels, const Tensor& upstream);

// input [batch, in] x weights [in, out] + bias [out]
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor grad_input, grad_weights, grad_bias;
};
DenseGrads dense_grad(const Tensor& input, const Tensor& weights,
                      const Tensor& upstream);

Tensor relu(const Tensor& input);
// Subgradient at exactly 0 is 0.
Tensor relu_grad(const Tensor& input, const Tensor& upstream);

struct PoolResult {
    Tensor output;                    // [out_time, channels]
    std::vector<std::int64_t> argmax; // absolute input time index per output
};
// input [time, channels]; per-channel max over windows, first index wins ties.
PoolResult maxpool1d(const Tensor& input, std::size_t pool, std::size_t stride);
Tensor maxpool1d_grad(const Tensor& upstream, const std::vector<std::int64_t>& argmax,
                      std::size_t in_time, std::size_t channels);

struct DropoutResult {
    Tensor output;
    Tensor mask; // 0 where dropped, 1/(1-rate) where kept; backward = mul
};
// Inverted dropout; inference mode is the identity (mask of ones).
DropoutResult dropout(const Tensor& input, double rate, rng::Xoshiro256pp& rng,
                      bool training);

// Training-mode core of dropout() on raw buffers: fills mask (one rng draw
// per element, in order) and writes y = x * mask. Shared with the batched
// engine so both paths consume the rng stream identically.
void dropout_into(const double* x, std::size_t n, double rate, rng::Xoshiro256pp& rng,
                  double* y, double* mask);

struct BatchNormState {
    Tensor running_mean, running_var; // [channels]
    double momentum = 0.9;            // new = momentum*old + (1-momentum)*batch
};

struct BatchNormCache {
    Tensor x_hat;   // [batch, channels]
    Tensor inv_std; // [channels], 1/sqrt(var+eps)
};

// input [batch, channels]. Training: normalize by batch mean / population
// variance and update running stats; batch of 1 is an error. Inference:
// normalize by running stats. Cache (optional) feeds the backward pass.
Tensor batchnorm1d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& stats, bool training, double epsilon = 1e-5,
                   BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor grad_input, grad_gamma, grad_beta;
};
BatchNormGrads batchnorm1d_grad(const Tensor& upstream, const Tensor& gamma,
                                const BatchNormCache& cache);

}  // namespace icsad::ops
