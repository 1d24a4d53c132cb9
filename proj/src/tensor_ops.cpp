#include "icsad/tensor_ops.hpp"

#include <cmath>
#include <string>

#include "conv_pack.hpp"
#include "icsad/errors.hpp"
#include "icsad/kernels.hpp"

namespace icsad::ops {
namespace {

// Validated conv geometry plus the channel-expanded buffers the kernels
// consume: xe[t][c] replicates input feature f = c/M across its M output
// channels; wk[k][c] is the kernel tensor transposed to tap-major order.
struct ConvPlan {
    std::size_t T, F, M, K, C, OT, stride;
    std::vector<double> xe, wk;
};

ConvPlan conv_plan(const Tensor& input, const ConvSpec& spec, const Tensor& kernels,
                   std::size_t bias_len) {
    require_rank(input, 2, "conv1d_depthwise input");
    require_rank(kernels, 3, "conv1d_depthwise kernels");
    ConvPlan p;
    p.T = input.dim(0);
    p.F = input.dim(1);
    p.M = spec.filters_per_feature;
    p.K = spec.kernel_size;
    p.stride = spec.stride;
    if (p.K < 1 || p.M < 1 || p.stride < 1)
        throw DimensionError("conv1d_depthwise: kernel_size, filters_per_feature and "
                             "stride must be positive");
    if (kernels.dim(0) != p.F)
        throw DimensionError("conv1d_depthwise: kernels feature axis is " +
                             std::to_string(kernels.dim(0)) + ", input has " +
                             std::to_string(p.F) + " features");
    if (kernels.dim(1) != p.M)
        throw DimensionError("conv1d_depthwise: kernels filter axis is " +
                             std::to_string(kernels.dim(1)) + ", spec says " +
                             std::to_string(p.M));
    if (kernels.dim(2) != p.K)
        throw DimensionError("conv1d_depthwise: kernels tap axis is " +
                             std::to_string(kernels.dim(2)) + ", spec says " +
                             std::to_string(p.K));
    if (p.T < p.K)
        throw DimensionError("conv1d_depthwise: time axis " + std::to_string(p.T) +
                             " shorter than kernel_size " + std::to_string(p.K));
    p.C = p.F * p.M;
    if (bias_len != p.C)
        throw DimensionError("conv1d_depthwise: bias axis is " + std::to_string(bias_len) +
                             ", expected features*filters = " + std::to_string(p.C));
    p.OT = conv_out_time(p.T, spec);

    p.xe.resize(p.T * p.C);
    detail::expand_channels(input.data(), p.T, p.F, p.M, p.xe.data());
    p.wk.resize(p.K * p.C);
    detail::repack_taps(kernels.data(), p.C, p.K, p.wk.data());
    return p;
}

}  // namespace

Tensor conv1d_depthwise(const Tensor& input, const ConvSpec& spec,
                        const Tensor& kernels, const Tensor& bias) {
    require_rank(bias, 1, "conv1d_depthwise bias");
    ConvPlan p = conv_plan(input, spec, kernels, bias.numel());
    Tensor out({p.OT, p.C});
    kern::active().conv_fwd(p.xe.data(), p.T, p.C, p.wk.data(), bias.data(), p.K,
                            p.stride, out.data(), p.OT);
    return out;
}

ConvGrads conv1d_depthwise_grad(const Tensor& input, const ConvSpec& spec,
                                const Tensor& kernels, const Tensor& upstream) {
    ConvPlan p = conv_plan(input, spec, kernels, spec.filters_per_feature * input.dim(1));
    require_rank(upstream, 2, "conv1d_depthwise upstream");
    if (upstream.dim(0) != p.OT || upstream.dim(1) != p.C)
        throw DimensionError("conv1d_depthwise: upstream shape " + upstream.shape_str() +
                             ", expected [" + std::to_string(p.OT) + "," +
                             std::to_string(p.C) + "]");
    const kern::Kernels& k = kern::active();

    std::vector<double> gxe(p.T * p.C, 0.0);
    k.conv_bwd_input(upstream.data(), p.OT, p.C, p.wk.data(), p.K, p.stride, gxe.data(),
                     p.T);
    ConvGrads g{Tensor({p.T, p.F}), Tensor({p.F, p.M, p.K}), Tensor({p.C})};
    detail::reduce_channels(gxe.data(), p.T, p.F, p.M, g.grad_input.data());

    std::vector<double> gwk(p.K * p.C, 0.0);
    k.conv_bwd_params(p.xe.data(), p.T, upstream.data(), p.OT, p.C, p.K, p.stride,
                      gwk.data(), g.grad_bias.data());
    detail::unpack_taps(gwk.data(), p.C, p.K, g.grad_kernels.data());
    return g;
}

namespace {

void check_dense(const Tensor& input, const Tensor& weights, std::size_t bias_len) {
    require_rank(input, 2, "dense input");
    require_rank(weights, 2, "dense weights");
    if (input.dim(1) != weights.dim(0))
        throw DimensionError("dense: input inner axis " + std::to_string(input.dim(1)) +
                             " does not match weights rows " +
                             std::to_string(weights.dim(0)));
    if (bias_len != weights.dim(1))
        throw DimensionError("dense: bias axis " + std::to_string(bias_len) +
                             " does not match weights cols " +
                             std::to_string(weights.dim(1)));
}

}  // namespace

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    require_rank(bias, 1, "dense bias");
    check_dense(input, weights, bias.numel());
    Tensor out({input.dim(0), weights.dim(1)});
    kern::active().dense_fwd(input.data(), input.dim(0), input.dim(1), weights.data(),
                             bias.data(), out.data(), weights.dim(1));
    return out;
}

DenseGrads dense_grad(const Tensor& input, const Tensor& weights,
                      const Tensor& upstream) {
    check_dense(input, weights, weights.dim(1));
    require_rank(upstream, 2, "dense upstream");
    if (upstream.dim(0) != input.dim(0) || upstream.dim(1) != weights.dim(1))
        throw DimensionError("dense: upstream shape " + upstream.shape_str() +
                             ", expected [" + std::to_string(input.dim(0)) + "," +
                             std::to_string(weights.dim(1)) + "]");
    const std::size_t m = input.dim(0), kk = input.dim(1), n = weights.dim(1);
    DenseGrads g{Tensor({m, kk}), Tensor({kk, n}), Tensor({n})};
    const kern::Kernels& k = kern::active();
    k.dense_bwd_input(upstream.data(), m, n, weights.data(), kk, g.grad_input.data());
    k.dense_bwd_params(input.data(), m, kk, upstream.data(), n, g.grad_weights.data(),
                       g.grad_bias.data());
    return g;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    kern::active().relu_fwd(input.data(), out.data(), input.numel());
    return out;
}

Tensor relu_grad(const Tensor& input, const Tensor& upstream) {
    if (!input.same_shape(upstream))
        throw DimensionError("relu_grad: upstream shape " + upstream.shape_str() +
                             " does not match input shape " + input.shape_str());
    Tensor out(input.shape());
    kern::active().relu_bwd(input.data(), upstream.data(), out.data(), input.numel());
    return out;
}

PoolResult maxpool1d(const Tensor& input, std::size_t pool, std::size_t stride) {
    require_rank(input, 2, "maxpool1d input");
    if (pool < 1 || stride < 1)
        throw DimensionError("maxpool1d: pool and stride must be positive");
    const std::size_t T = input.dim(0), C = input.dim(1);
    if (T < pool)
        throw DimensionError("maxpool1d: time axis " + std::to_string(T) +
                             " shorter than pool " + std::to_string(pool));
    const std::size_t OT = (T - pool) / stride + 1;
    PoolResult r{Tensor({OT, C}), std::vector<std::int64_t>(OT * C)};
    kern::active().pool_fwd(input.data(), T, C, pool, stride, r.output.data(),
                            r.argmax.data(), OT);
    return r;
}

Tensor maxpool1d_grad(const Tensor& upstream, const std::vector<std::int64_t>& argmax,
                      std::size_t in_time, std::size_t channels) {
    require_rank(upstream, 2, "maxpool1d upstream");
    if (upstream.dim(1) != channels || upstream.numel() != argmax.size())
        throw DimensionError("maxpool1d_grad: upstream shape " + upstream.shape_str() +
                             " does not match argmax of " +
                             std::to_string(argmax.size() / (channels ? channels : 1)) +
                             " steps x " + std::to_string(channels) + " channels");
    Tensor out({in_time, channels});
    kern::active().pool_bwd(upstream.data(), upstream.dim(0), channels, argmax.data(),
                            out.data(), in_time);
    return out;
}

void dropout_into(const double* x, std::size_t n, double rate, rng::Xoshiro256pp& rng,
                  double* y, double* mask) {
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n; ++i)
        mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    kern::active().mul(x, mask, y, n);
}

DropoutResult dropout(const Tensor& input, double rate, rng::Xoshiro256pp& rng,
                      bool training) {
    if (rate < 0.0 || rate >= 1.0)
        throw ConfigError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
    DropoutResult r{Tensor(input.shape()), Tensor(input.shape())};
    if (!training || rate == 0.0) {
        for (std::size_t i = 0; i < input.numel(); ++i) r.mask[i] = 1.0;
        r.output = input;
        return r;
    }
    dropout_into(input.data(), input.numel(), rate, rng, r.output.data(), r.mask.data());
    return r;
}

Tensor batchnorm1d(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                   BatchNormState& stats, bool training, double epsilon,
                   BatchNormCache* cache) {
    require_rank(input, 2, "batchnorm1d input");
    const std::size_t N = input.dim(0), C = input.dim(1);
    if (gamma.numel() != C || beta.numel() != C)
        throw DimensionError("batchnorm1d: gamma/beta axis must match " +
                             std::to_string(C) + " channels");
    if (stats.running_mean.numel() != C || stats.running_var.numel() != C)
        throw DimensionError("batchnorm1d: running stats axis must match " +
                             std::to_string(C) + " channels");
    const kern::Kernels& k = kern::active();
    Tensor out({N, C});

    if (!training) {
        std::vector<double> scale(C), shift(C);
        for (std::size_t c = 0; c < C; ++c) {
            const double istd = 1.0 / std::sqrt(stats.running_var[c] + epsilon);
            scale[c] = gamma[c] * istd;
            shift[c] = beta[c] - stats.running_mean[c] * scale[c];
        }
        k.affine_channels(input.data(), N, C, scale.data(), shift.data(), out.data());
        return out;
    }

    if (N < 2)
        throw DimensionError("batchnorm1d: training needs a batch axis of at least 2 "
                             "rows (variance undefined for 1)");
    std::vector<double> mean(C, 0.0), var(C, 0.0);
    k.colsum_acc(input.data(), N, C, mean.data());
    for (std::size_t c = 0; c < C; ++c) mean[c] /= static_cast<double>(N);
    k.colsq_acc(input.data(), N, C, mean.data(), var.data());
    for (std::size_t c = 0; c < C; ++c) var[c] /= static_cast<double>(N);  // population

    Tensor x_hat({N, C});
    std::vector<double> istd(C), shift(C);
    for (std::size_t c = 0; c < C; ++c) {
        istd[c] = 1.0 / std::sqrt(var[c] + epsilon);
        shift[c] = -mean[c] * istd[c];
    }
    k.affine_channels(input.data(), N, C, istd.data(), shift.data(), x_hat.data());
    k.affine_channels(x_hat.data(), N, C, gamma.data(), beta.data(), out.data());

    const double mom = stats.momentum;
    for (std::size_t c = 0; c < C; ++c) {
        stats.running_mean[c] = mom * stats.running_mean[c] + (1.0 - mom) * mean[c];
        stats.running_var[c] = mom * stats.running_var[c] + (1.0 - mom) * var[c];
    }
    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = Tensor({C}, std::move(istd));
    }
    return out;
}

BatchNormGrads batchnorm1d_grad(const Tensor& upstream, const Tensor& gamma,
                                const BatchNormCache& cache) {
    require_rank(upstream, 2, "batchnorm1d upstream");
    if (!upstream.same_shape(cache.x_hat))
        throw DimensionError("batchnorm1d_grad: upstream shape " + upstream.shape_str() +
                             " does not match cached batch " + cache.x_hat.shape_str());
    const std::size_t N = upstream.dim(0), C = upstream.dim(1);
    BatchNormGrads g{Tensor({N, C}), Tensor({C}), Tensor({C})};
    const kern::Kernels& k = kern::active();

    // grad_beta = column sums of gy; grad_gamma = column sums of gy*x_hat
    k.colsum_acc(upstream.data(), N, C, g.grad_beta.data());
    Tensor gyx({N, C});
    k.mul(upstream.data(), cache.x_hat.data(), gyx.data(), N * C);
    k.colsum_acc(gyx.data(), N, C, g.grad_gamma.data());

    // gx = a*gy + b*x_hat + s with per-channel coefficients (population-
    // variance normalization over the batch axis):
    //   a = gamma*istd, b = -a*grad_gamma/N, s = -a*grad_beta/N
    const double n = static_cast<double>(N);
    for (std::size_t c = 0; c < C; ++c) {
        const double a = gamma[c] * cache.inv_std[c];
        const double b = -a * g.grad_gamma[c] / n;
        const double s = -a * g.grad_beta[c] / n;
        for (std::size_t t = 0; t < N; ++t)
            g.grad_input.at(t, c) =
                a * upstream.at(t, c) + b * cache.x_hat.at(t, c) + s;
    }
    return g;
}

}  // namespace icsad::ops
