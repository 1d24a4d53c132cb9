// Layer ops against independent oracles: naive triple-loop implementations
// for the forward maps, central finite differences for every gradient.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <vector>

#include "icsad/errors.hpp"
#include "icsad/rng.hpp"
#include "icsad/tensor.hpp"
#include "icsad/tensor_ops.hpp"

using icsad::DimensionError;
using icsad::Tensor;
using icsad::ops::BatchNormCache;
using icsad::ops::BatchNormState;
using icsad::ops::ConvSpec;

namespace {

// --- oracles (deliberately written against the math, not the kernels) ---

Tensor naive_depthwise_conv(const Tensor& x, const ConvSpec& s, const Tensor& w,
                            const Tensor& b) {
    const std::size_t T = x.dim(0), F = x.dim(1), M = s.filters_per_feature;
    const std::size_t OT = (T - s.kernel_size) / s.stride + 1;
    Tensor y({OT, F * M});
    for (std::size_t t = 0; t < OT; ++t)
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t m = 0; m < M; ++m) {
                double acc = b[f * M + m];
                for (std::size_t k = 0; k < s.kernel_size; ++k)
                    acc += x.at(t * s.stride + k, f) * w.at(f, m, k);
                y.at(t, f * M + m) = acc;
            }
    return y;
}

Tensor naive_matmul_bias(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor y({x.dim(0), w.dim(1)});
    for (std::size_t i = 0; i < x.dim(0); ++i)
        for (std::size_t j = 0; j < w.dim(1); ++j) {
            double acc = b[j];
            for (std::size_t k = 0; k < x.dim(1); ++k) acc += x.at(i, k) * w.at(k, j);
            y.at(i, j) = acc;
        }
    return y;
}

Tensor naive_maxpool(const Tensor& x, std::size_t pool, std::size_t stride) {
    const std::size_t OT = (x.dim(0) - pool) / stride + 1;
    Tensor y({OT, x.dim(1)});
    for (std::size_t t = 0; t < OT; ++t)
        for (std::size_t c = 0; c < x.dim(1); ++c) {
            double best = x.at(t * stride, c);
            for (std::size_t p = 1; p < pool; ++p)
                best = std::max(best, x.at(t * stride + p, c));
            y.at(t, c) = best;
        }
    return y;
}

Tensor rand_tensor(std::vector<std::size_t> shape, icsad::rng::Xoshiro256pp& rng,
                   double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Central finite differences of a scalar loss over every entry of `param`,
// compared against `analytic` with relative error < 1e-6 at h = 1e-5.
void check_grad_fd(Tensor& param, const std::function<double()>& loss,
                   const Tensor& analytic, double h = 1e-5, double tol = 1e-6) {
    REQUIRE(param.same_shape(analytic));
    for (std::size_t i = 0; i < param.numel(); ++i) {
        const double keep = param[i];
        param[i] = keep + h;
        const double up = loss();
        param[i] = keep - h;
        const double dn = loss();
        param[i] = keep;
        const double fd = (up - dn) / (2.0 * h);
        const double a = analytic[i];
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
        CHECK(rel < tol);
    }
}

double dot_all(const Tensor& a, const Tensor& r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a[i] * r[i];
    return acc;
}

}  // namespace

TEST_CASE("depthwise conv: pinned small cases") {
    // sum kernel
    Tensor x({4, 1}, {1, 2, 3, 4});
    Tensor w({1, 1, 2}, {1, 1});
    Tensor b({1}, {0});
    Tensor y = icsad::ops::conv1d_depthwise(x, {2, 1, 1}, w, b);
    REQUIRE(y.shape() == std::vector<std::size_t>{3, 1});
    CHECK(y[0] == 3);
    CHECK(y[1] == 5);
    CHECK(y[2] == 7);
    // identity tap
    Tensor x2({3, 1}, {5, 5, 5});
    Tensor w2({1, 1, 2}, {1, 0});
    Tensor y2 = icsad::ops::conv1d_depthwise(x2, {2, 1, 1}, w2, b);
    REQUIRE(y2.shape() == std::vector<std::size_t>{2, 1});
    CHECK(y2[0] == 5);
    CHECK(y2[1] == 5);
}

TEST_CASE("depthwise conv matches the sliding-window oracle") {
    icsad::rng::Xoshiro256pp rng(11);
    for (const ConvSpec s : {ConvSpec{2, 2, 1}, ConvSpec{3, 1, 1}, ConvSpec{2, 4, 2},
                             ConvSpec{4, 3, 1}}) {
        Tensor x = rand_tensor({8, 3}, rng);
        Tensor w = rand_tensor({3, s.filters_per_feature, s.kernel_size}, rng);
        Tensor b = rand_tensor({3 * s.filters_per_feature}, rng);
        Tensor got = icsad::ops::conv1d_depthwise(x, s, w, b);
        Tensor want = naive_depthwise_conv(x, s, w, b);
        CHECK(max_abs_diff(got, want) < 1e-12);
    }
}

TEST_CASE("depthwise conv never mixes features") {
    icsad::rng::Xoshiro256pp rng(12);
    const ConvSpec s{2, 2, 1};
    Tensor x = rand_tensor({8, 3}, rng);
    Tensor w = rand_tensor({3, 2, 2}, rng);
    Tensor b = rand_tensor({6}, rng);
    Tensor base = icsad::ops::conv1d_depthwise(x, s, w, b);
    for (std::size_t f = 0; f < 3; ++f) {
        Tensor xp = x;
        for (std::size_t t = 0; t < 8; ++t) xp.at(t, f) += rng.uniform(0.1, 0.5);
        Tensor out = icsad::ops::conv1d_depthwise(xp, s, w, b);
        for (std::size_t t = 0; t < out.dim(0); ++t)
            for (std::size_t c = 0; c < out.dim(1); ++c) {
                if (c / 2 == f)
                    CHECK(out.at(t, c) != base.at(t, c));
                else
                    CHECK(out.at(t, c) == base.at(t, c));
            }
    }
}

TEST_CASE("depthwise conv shape errors name the offending axis") {
    Tensor x({4, 2});
    Tensor w({2, 1, 2});
    Tensor b({2});
    CHECK_THROWS_AS(icsad::ops::conv1d_depthwise(x, {3, 1, 1}, w, b), DimensionError);
    CHECK_THROWS_AS(icsad::ops::conv1d_depthwise(x, {2, 2, 1}, w, b), DimensionError);
    Tensor bad_bias({3});
    CHECK_THROWS_AS(icsad::ops::conv1d_depthwise(x, {2, 1, 1}, w, bad_bias),
                    DimensionError);
    Tensor short_x({1, 2});
    CHECK_THROWS_WITH_AS(icsad::ops::conv1d_depthwise(short_x, {2, 1, 1}, w, b),
                         doctest::Contains("time axis"), DimensionError);
}

TEST_CASE("depthwise conv gradients: pinned cases and finite differences") {
    // zero upstream -> zero grads
    {
        icsad::rng::Xoshiro256pp rng(13);
        Tensor x = rand_tensor({6, 2}, rng);
        Tensor w = rand_tensor({2, 2, 2}, rng);
        Tensor zero_up({5, 4});
        auto g = icsad::ops::conv1d_depthwise_grad(x, {2, 2, 1}, w, zero_up);
        for (std::size_t i = 0; i < g.grad_input.numel(); ++i) CHECK(g.grad_input[i] == 0);
        for (std::size_t i = 0; i < g.grad_kernels.numel(); ++i)
            CHECK(g.grad_kernels[i] == 0);
        for (std::size_t i = 0; i < g.grad_bias.numel(); ++i) CHECK(g.grad_bias[i] == 0);
    }
    // single-weight chain rule: input [a,b], kernel [w], upstream [g1,g2]
    {
        const double a = 0.7, bb = -1.3, g1 = 0.4, g2 = 2.0;
        Tensor x({2, 1}, {a, bb});
        Tensor w({1, 1, 1}, {0.9});
        Tensor up({2, 1}, {g1, g2});
        auto g = icsad::ops::conv1d_depthwise_grad(x, {1, 1, 1}, w, up);
        CHECK(g.grad_kernels[0] == doctest::Approx(a * g1 + bb * g2).epsilon(1e-12));
    }
    // random case against central differences
    icsad::rng::Xoshiro256pp rng(14);
    const ConvSpec s{2, 2, 1};
    Tensor x = rand_tensor({8, 3}, rng);
    Tensor w = rand_tensor({3, 2, 2}, rng);
    Tensor b = rand_tensor({6}, rng);
    Tensor r = rand_tensor({7, 6}, rng);  // projection defining the scalar loss
    auto loss = [&] { return dot_all(icsad::ops::conv1d_depthwise(x, s, w, b), r); };
    auto g = icsad::ops::conv1d_depthwise_grad(x, s, w, r);
    check_grad_fd(x, loss, g.grad_input);
    check_grad_fd(w, loss, g.grad_kernels);
    check_grad_fd(b, loss, g.grad_bias);
}

TEST_CASE("dense: pinned cases, oracle, gradients") {
    {
        Tensor x({2, 2}, {1, 2, 3, 4});
        Tensor eye({2, 2}, {1, 0, 0, 1});
        Tensor zb({2});
        Tensor y = icsad::ops::dense(x, eye, zb);
        CHECK(max_abs_diff(y, x) == 0);
    }
    {
        Tensor x({1, 2}, {1, 1});
        Tensor w({2, 1}, {2, 3});
        Tensor b({1}, {1});
        CHECK(icsad::ops::dense(x, w, b)[0] == 6);
    }
    icsad::rng::Xoshiro256pp rng(15);
    Tensor x = rand_tensor({4, 5}, rng);
    Tensor w = rand_tensor({5, 2}, rng);
    Tensor b = rand_tensor({2}, rng);
    CHECK(max_abs_diff(icsad::ops::dense(x, w, b), naive_matmul_bias(x, w, b)) < 1e-12);

    Tensor r = rand_tensor({4, 2}, rng);
    auto loss = [&] { return dot_all(icsad::ops::dense(x, w, b), r); };
    auto g = icsad::ops::dense_grad(x, w, r);
    check_grad_fd(x, loss, g.grad_input);
    check_grad_fd(w, loss, g.grad_weights);
    check_grad_fd(b, loss, g.grad_bias);

    // batch of one, scalar in/out: grad_weight = input * upstream
    Tensor x1({1, 1}, {2.5});
    Tensor w1({1, 1}, {0.3});
    Tensor up1({1, 1}, {4.0});
    CHECK(icsad::ops::dense_grad(x1, w1, up1).grad_weights[0] == 10.0);

    CHECK_THROWS_AS(icsad::ops::dense(x, rand_tensor({4, 2}, rng), b), DimensionError);
}

TEST_CASE("relu forward and gradient") {
    Tensor x({3}, {-1, 0, 2});
    Tensor y = icsad::ops::relu(x);
    CHECK(y[0] == 0);
    CHECK(y[1] == 0);
    CHECK(y[2] == 2);
    Tensor x2({2}, {-1, 2});
    Tensor up({2}, {5, 5});
    Tensor g = icsad::ops::relu_grad(x2, up);
    CHECK(g[0] == 0);
    CHECK(g[1] == 5);
    // tie at exactly zero passes nothing
    Tensor x3({1}, {0.0});
    CHECK(icsad::ops::relu_grad(x3, Tensor({1}, {7.0}))[0] == 0.0);
    // all-negative input
    Tensor x4({3}, {-5, -1, -0.25});
    Tensor y4 = icsad::ops::relu(x4);
    Tensor g4 = icsad::ops::relu_grad(x4, Tensor({3}, {1, 1, 1}));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(y4[i] == 0);
        CHECK(g4[i] == 0);
    }
}

TEST_CASE("maxpool: pinned cases, oracle, gradient partition") {
    {
        Tensor x({4, 1}, {1, 3, 2, 2});
        auto r = icsad::ops::maxpool1d(x, 2, 2);
        REQUIRE(r.output.shape() == std::vector<std::size_t>{2, 1});
        CHECK(r.output[0] == 3);
        CHECK(r.output[1] == 2);
        CHECK(r.argmax[0] == 1);
        CHECK(r.argmax[1] == 2);
    }
    {
        Tensor x({6, 2});
        for (std::size_t i = 0; i < x.numel(); ++i) x[i] = 4.25;
        auto r = icsad::ops::maxpool1d(x, 2, 2);
        for (std::size_t t = 0; t < 3; ++t)
            for (std::size_t c = 0; c < 2; ++c) {
                CHECK(r.output.at(t, c) == 4.25);
                CHECK(r.argmax[t * 2 + c] == static_cast<std::int64_t>(2 * t));
            }
    }
    icsad::rng::Xoshiro256pp rng(16);
    Tensor x = rand_tensor({10, 4}, rng);
    auto r = icsad::ops::maxpool1d(x, 2, 2);
    CHECK(max_abs_diff(r.output, naive_maxpool(x, 2, 2)) == 0);

    // gradient partition: each window's routed mass equals its upstream entry
    Tensor up = rand_tensor({5, 4}, rng);
    Tensor gx = icsad::ops::maxpool1d_grad(up, r.argmax, 10, 4);
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 4; ++c) {
            const double win = gx.at(2 * t, c) + gx.at(2 * t + 1, c);
            CHECK(win == up.at(t, c));
        }
}

TEST_CASE("dropout: identity modes and survivor statistics") {
    icsad::rng::Xoshiro256pp rng(17);
    Tensor x = rand_tensor({10, 10}, rng, 0.5, 1.5);
    auto r0 = icsad::ops::dropout(x, 0.0, rng, true);
    CHECK(max_abs_diff(r0.output, x) == 0);
    for (std::size_t i = 0; i < r0.mask.numel(); ++i) CHECK(r0.mask[i] == 1.0);
    auto ri = icsad::ops::dropout(x, 0.8, rng, false);
    CHECK(max_abs_diff(ri.output, x) == 0);

    Tensor big({1000, 1000});
    for (std::size_t i = 0; i < big.numel(); ++i) big[i] = 1.0;
    auto rb = icsad::ops::dropout(big, 0.5, rng, true);
    std::size_t survivors = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < rb.output.numel(); ++i) {
        if (rb.mask[i] != 0.0) ++survivors;
        sum += rb.output[i];
    }
    const double frac = static_cast<double>(survivors) / 1e6;
    CHECK(frac > 0.49);
    CHECK(frac < 0.51);
    CHECK(std::abs(sum / 1e6 - 1.0) < 0.02);  // E[output] preserved by 1/(1-rate)

    CHECK_THROWS_AS(icsad::ops::dropout(x, 1.0, rng, true), icsad::ConfigError);
}

TEST_CASE("batchnorm: pinned symmetry, affine stats, moment normalization") {
    auto fresh = [](std::size_t c) {
        BatchNormState st{Tensor({c}), Tensor({c}), 0.9};
        return st;
    };
    {
        Tensor x({2, 1}, {0, 2});
        Tensor gamma({1}, {1});
        Tensor beta({1}, {0});
        auto st = fresh(1);
        Tensor y = icsad::ops::batchnorm1d(x, gamma, beta, st, true, 1e-12);
        CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-9));
        CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-9));
    }
    {
        // gamma 3, beta 5 on already-normalized data -> mean 5, std 3
        icsad::rng::Xoshiro256pp rng(18);
        Tensor x = rand_tensor({64, 2}, rng);
        Tensor g1({2}, {1, 1}), b0({2}, {0, 0});
        auto st = fresh(2);
        Tensor xn = icsad::ops::batchnorm1d(x, g1, b0, st, true, 1e-12);
        Tensor g3({2}, {3, 3}), b5({2}, {5, 5});
        auto st2 = fresh(2);
        Tensor y = icsad::ops::batchnorm1d(xn, g3, b5, st2, true, 1e-12);
        for (std::size_t c = 0; c < 2; ++c) {
            double mean = 0, var = 0;
            for (std::size_t t = 0; t < 64; ++t) mean += y.at(t, c);
            mean /= 64;
            for (std::size_t t = 0; t < 64; ++t)
                var += (y.at(t, c) - mean) * (y.at(t, c) - mean);
            var /= 64;
            CHECK(mean == doctest::Approx(5.0).epsilon(1e-9));
            CHECK(std::sqrt(var) == doctest::Approx(3.0).epsilon(1e-9));
        }
    }
    {
        icsad::rng::Xoshiro256pp rng(19);
        Tensor x = rand_tensor({50, 3}, rng, -2.0, 5.0);
        Tensor g1({3}, {1, 1, 1}), b0({3});
        auto st = fresh(3);
        Tensor y = icsad::ops::batchnorm1d(x, g1, b0, st, true, 1e-12);
        for (std::size_t c = 0; c < 3; ++c) {
            double mean = 0, var = 0;
            for (std::size_t t = 0; t < 50; ++t) mean += y.at(t, c);
            mean /= 50;
            for (std::size_t t = 0; t < 50; ++t)
                var += (y.at(t, c) - mean) * (y.at(t, c) - mean);
            var /= 50;
            CHECK(std::abs(mean) < 1e-10);
            CHECK(std::abs(var - 1.0) < 1e-6);
        }
    }
    {
        Tensor x({1, 2}, {1, 2});
        Tensor g({2}, {1, 1}), b({2});
        auto st = fresh(2);
        CHECK_THROWS_AS(icsad::ops::batchnorm1d(x, g, b, st, true), DimensionError);
        // inference mode accepts a single row
        Tensor y = icsad::ops::batchnorm1d(x, g, b, st, false);
        CHECK(y.numel() == 2);
    }
}

TEST_CASE("batchnorm running stats blend with momentum and drive inference") {
    Tensor x({4, 1}, {1, 2, 3, 4});  // mean 2.5, population var 1.25
    Tensor g({1}, {1}), b({1}, {0});
    BatchNormState st{Tensor({1}, {1.0}), Tensor({1}, {1.0}), 0.9};
    icsad::ops::batchnorm1d(x, g, b, st, true);
    CHECK(st.running_mean[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 2.5).epsilon(1e-12));
    CHECK(st.running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.25).epsilon(1e-12));
    Tensor one({1, 1}, {st.running_mean[0]});
    Tensor y = icsad::ops::batchnorm1d(one, g, b, st, false);
    CHECK(std::abs(y[0]) < 1e-9);  // input at the running mean normalizes to ~0
}

TEST_CASE("batchnorm gradients match finite differences") {
    icsad::rng::Xoshiro256pp rng(20);
    Tensor x = rand_tensor({12, 3}, rng, -1.0, 3.0);
    Tensor gamma = rand_tensor({3}, rng, 0.5, 1.5);
    Tensor beta = rand_tensor({3}, rng);
    Tensor r = rand_tensor({12, 3}, rng);
    const double eps = 1e-5;
    auto loss = [&] {
        BatchNormState st{Tensor({3}), Tensor({3}), 0.9};
        return dot_all(icsad::ops::batchnorm1d(x, gamma, beta, st, true, eps), r);
    };
    BatchNormState st{Tensor({3}), Tensor({3}), 0.9};
    BatchNormCache cache;
    icsad::ops::batchnorm1d(x, gamma, beta, st, true, eps, &cache);
    auto g = icsad::ops::batchnorm1d_grad(r, gamma, cache);
    check_grad_fd(x, loss, g.grad_input, 1e-5, 1e-5);
    check_grad_fd(gamma, loss, g.grad_gamma, 1e-5, 1e-5);
    check_grad_fd(beta, loss, g.grad_beta, 1e-5, 1e-5);
}

TEST_CASE("forward ops are deterministic given identical inputs") {
    icsad::rng::Xoshiro256pp rng(21);
    Tensor x = rand_tensor({8, 3}, rng);
    Tensor w = rand_tensor({3, 2, 2}, rng);
    Tensor b = rand_tensor({6}, rng);
    const ConvSpec s{2, 2, 1};
    Tensor a1 = icsad::ops::conv1d_depthwise(x, s, w, b);
    Tensor a2 = icsad::ops::conv1d_depthwise(x, s, w, b);
    CHECK(std::memcmp(a1.data(), a2.data(), a1.numel() * sizeof(double)) == 0);
    icsad::rng::Xoshiro256pp r1(5), r2(5);
    auto d1 = icsad::ops::dropout(x, 0.3, r1, true);
    auto d2 = icsad::ops::dropout(x, 0.3, r2, true);
    CHECK(std::memcmp(d1.output.data(), d2.output.data(), x.numel() * sizeof(double)) ==
          0);
}
