#include "icsad/nn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "conv_pack.hpp"
#include "icsad/errors.hpp"
#include "icsad/kernels.hpp"

namespace icsad::nn {

const char* kind_name(LayerKind k) {
    switch (k) {
    case LayerKind::depthwise_conv: return "depthwise_conv";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::dropout: return "dropout";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::dense: return "dense";
    case LayerKind::flatten: return "flatten";
    case LayerKind::feature_enrich_dense: return "feature_enrich_dense";
    }
    return "?";
}

LayerSpec LayerSpec::Conv(std::size_t kernel, std::size_t filters, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::depthwise_conv;
    s.conv = ops::ConvSpec{kernel, filters, stride};
    return s;
}
LayerSpec LayerSpec::Relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
}
LayerSpec LayerSpec::MaxPool(std::size_t pool, std::size_t stride) {
    LayerSpec s;
    s.kind = LayerKind::maxpool;
    s.pool = pool;
    s.pool_stride = stride;
    return s;
}
LayerSpec LayerSpec::Dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.rate = rate;
    return s;
}
LayerSpec LayerSpec::BatchNorm(double momentum, double epsilon) {
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    s.bn_momentum = momentum;
    s.bn_epsilon = epsilon;
    return s;
}
LayerSpec LayerSpec::Dense(std::size_t width) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.width = width;
    return s;
}
LayerSpec LayerSpec::Flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
}
LayerSpec LayerSpec::FeatureEnrich(std::size_t width) {
    LayerSpec s;
    s.kind = LayerKind::feature_enrich_dense;
    s.width = width;
    return s;
}

ModelConfig paper_cnn(std::size_t conv_blocks, std::size_t base_filters, std::size_t kernel,
                      std::size_t n, std::size_t feature_count, std::uint64_t seed,
                      bool batchnorm, double dropout_rate) {
    ModelConfig cfg;
    cfg.n = n;
    cfg.feature_count = feature_count;
    cfg.seed = seed;
    for (std::size_t b = 0; b < conv_blocks; ++b) {
        // Channel count doubles per block: the first conv fans each feature
        // out to base_filters channels, later convs double what they get.
        cfg.layers.push_back(LayerSpec::Conv(kernel, b == 0 ? base_filters : 2));
        if (batchnorm) cfg.layers.push_back(LayerSpec::BatchNorm());
        cfg.layers.push_back(LayerSpec::Relu());
        cfg.layers.push_back(LayerSpec::MaxPool(2, 2));
    }
    if (dropout_rate > 0.0) cfg.layers.push_back(LayerSpec::Dropout(dropout_rate));
    cfg.layers.push_back(LayerSpec::Flatten());
    cfg.layers.push_back(LayerSpec::Dense(feature_count));
    return cfg;
}

namespace {

[[noreturn]] void bad_layer(std::size_t i, LayerKind k, const std::string& why) {
    throw ConfigError("layer " + std::to_string(i + 1) + " (" + kind_name(k) + "): " + why);
}

void fill_uniform(Tensor& t, double limit, rng::Xoshiro256pp& r) {
    for (double& v : t.vec()) v = (2.0 * r.uniform() - 1.0) * limit;
}

}  // namespace

Model build_model(const ModelConfig& config) {
    if (config.layers.empty()) throw ConfigError("model has an empty layer list");
    if (config.n < 2)
        throw ConfigError("input sequence length must be at least 2, got " +
                          std::to_string(config.n));
    if (config.feature_count < 1) throw ConfigError("feature_count must be at least 1");

    Model m;
    m.config = config;
    LayerShape s{config.n, config.feature_count, false};
    m.shapes.push_back(s);
    rng::Xoshiro256pp r(config.seed);

    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerSpec& ls = config.layers[i];
        LayerParams p;
        switch (ls.kind) {
        case LayerKind::depthwise_conv: {
            if (s.flat) bad_layer(i, ls.kind, "expects a [time, channels] sequence, got flat input");
            const std::size_t K = ls.conv.kernel_size, M = ls.conv.filters_per_feature;
            if (K < 2) bad_layer(i, ls.kind, "kernel_size must be at least 2");
            if (M < 1) bad_layer(i, ls.kind, "filters_per_feature must be at least 1");
            if (ls.conv.stride < 1) bad_layer(i, ls.kind, "stride must be at least 1");
            if (s.time < K)
                bad_layer(i, ls.kind,
                          "time axis " + std::to_string(s.time) + " is shorter than kernel_size " +
                              std::to_string(K));
            p.w = Tensor({s.ch, M, K});
            fill_uniform(p.w, std::sqrt(6.0 / static_cast<double>(K)), r);
            p.b = Tensor({s.ch * M});
            s.time = ops::conv_out_time(s.time, ls.conv);
            s.ch *= M;
            break;
        }
        case LayerKind::relu:
            break;
        case LayerKind::maxpool:
            if (s.flat) bad_layer(i, ls.kind, "expects a [time, channels] sequence, got flat input");
            if (ls.pool < 1 || ls.pool_stride < 1)
                bad_layer(i, ls.kind, "pool size and stride must be at least 1");
            if (s.time < ls.pool)
                bad_layer(i, ls.kind,
                          "time axis " + std::to_string(s.time) + " is shorter than pool size " +
                              std::to_string(ls.pool));
            s.time = (s.time - ls.pool) / ls.pool_stride + 1;
            break;
        case LayerKind::dropout:
            if (!(ls.rate >= 0.0 && ls.rate < 1.0))
                bad_layer(i, ls.kind, "rate must be in [0,1)");
            break;
        case LayerKind::batchnorm: {
            if (!(ls.bn_momentum >= 0.0 && ls.bn_momentum < 1.0))
                bad_layer(i, ls.kind, "momentum must be in [0,1)");
            if (!(ls.bn_epsilon > 0.0)) bad_layer(i, ls.kind, "epsilon must be positive");
            p.gamma = Tensor({s.ch});
            for (double& v : p.gamma.vec()) v = 1.0;
            p.beta = Tensor({s.ch});
            p.bn.running_mean = Tensor({s.ch});
            p.bn.running_var = Tensor({s.ch});
            for (double& v : p.bn.running_var.vec()) v = 1.0;
            p.bn.momentum = ls.bn_momentum;
            break;
        }
        case LayerKind::dense: {
            if (!s.flat) bad_layer(i, ls.kind, "expects flat input; add a flatten layer first");
            if (ls.width < 1) bad_layer(i, ls.kind, "width must be at least 1");
            p.w = Tensor({s.ch, ls.width});
            fill_uniform(p.w, std::sqrt(6.0 / static_cast<double>(s.ch)), r);
            p.b = Tensor({ls.width});
            s.ch = ls.width;
            break;
        }
        case LayerKind::flatten:
            if (s.flat) bad_layer(i, ls.kind, "input is already flat");
            s.ch = s.time * s.ch;
            s.time = 0;
            s.flat = true;
            break;
        case LayerKind::feature_enrich_dense: {
            if (s.flat) bad_layer(i, ls.kind, "expects a [time, channels] sequence, got flat input");
            if (ls.width < 1) bad_layer(i, ls.kind, "width must be at least 1");
            p.w = Tensor({s.ch, ls.width});
            fill_uniform(p.w, std::sqrt(6.0 / static_cast<double>(s.ch)), r);
            p.b = Tensor({ls.width});
            s.ch = ls.width;
            break;
        }
        }
        m.params.push_back(std::move(p));
        m.shapes.push_back(s);
    }

    const std::size_t last = config.layers.size() - 1;
    if (config.layers[last].kind != LayerKind::dense || s.ch != config.feature_count)
        bad_layer(last, config.layers[last].kind,
                  "model must end in a dense layer of width " +
                      std::to_string(config.feature_count) +
                      " (the prediction target feature count)");

    for (const Model::ParamRef& ref : m.param_tensors()) {
        m.adam.m.push_back(Tensor(ref.tensor->shape()));
        m.adam.v.push_back(Tensor(ref.tensor->shape()));
    }
    return m;
}

namespace {

template <typename ModelT, typename Ref>
std::vector<Ref> collect_params(ModelT& m) {
    std::vector<Ref> out;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        auto& p = m.params[i];
        switch (m.config.layers[i].kind) {
        case LayerKind::depthwise_conv:
        case LayerKind::dense:
        case LayerKind::feature_enrich_dense:
            out.push_back({&p.w, i});
            out.push_back({&p.b, i});
            break;
        case LayerKind::batchnorm:
            out.push_back({&p.gamma, i});
            out.push_back({&p.beta, i});
            break;
        default:
            break;
        }
    }
    return out;
}

}  // namespace

std::vector<Model::ParamRef> Model::param_tensors() {
    return collect_params<Model, ParamRef>(*this);
}
std::vector<Model::ConstParamRef> Model::param_tensors() const {
    return collect_params<const Model, ConstParamRef>(*this);
}
std::size_t Model::param_count() const {
    std::size_t n = 0;
    for (const ConstParamRef& r : param_tensors()) n += r.tensor->numel();
    return n;
}

std::vector<Tensor> zero_gradients(Model& model) {
    std::vector<Tensor> g;
    for (const Model::ParamRef& r : model.param_tensors()) g.push_back(Tensor(r.tensor->shape()));
    return g;
}

// ---------------------------------------------------------------------------
// Batched forward / backward. Activations are [batch, time, channels] in
// sequence mode and [batch, width] after flatten; batchnorm and the
// feature-enriching dense treat [batch*time, channels] as their row axis.
//
// A Workspace owns every intermediate buffer and is reused chunk after chunk
// (Tensor::ensure keeps allocations), so the steady-state loop allocates
// nothing. Layers pass raw data pointers; geometry comes from Model::shapes.
// Identity steps (flatten, inference-mode dropout) alias their input instead
// of copying. backprop() must run directly after a training-mode
// apply_layers() on the same workspace: it reuses the recorded inputs, the
// conv layers' expanded inputs and repacked taps, and the pool/dropout/
// batchnorm byproducts.

namespace {

struct LayerScratch {
    Tensor out;                        // forward output
    Tensor xe;                         // conv: channel-expanded input
    Tensor gin;                        // gradient w.r.t. this layer's input
    Tensor gxe;                        // conv: gradient w.r.t. expanded input
    Tensor bn_in, bn_g;                // batchnorm [rows, ch] staging copies
    std::vector<double> wk, gwk;       // tap-major conv weights and their grads
    std::vector<std::int64_t> argmax;  // maxpool winners
    Tensor mask;                       // dropout keep-mask
    ops::BatchNormCache bnc;
};

struct Workspace {
    std::vector<LayerScratch> layers;
    std::vector<const double*> in_ptr;  // data feeding each layer, set by forward
    Tensor in, tgt, gout;               // chunk staging for the driver loops
};

void check_batch(const Model& model, const Tensor& batch) {
    require_rank(batch, 3, "forward batch");
    const ModelConfig& cfg = model.config;
    if (batch.dim(1) != cfg.n)
        throw DimensionError("forward: batch sequence axis is " + std::to_string(batch.dim(1)) +
                             ", model expects n = " + std::to_string(cfg.n));
    if (batch.dim(2) != cfg.feature_count)
        throw DimensionError("forward: batch feature axis is " + std::to_string(batch.dim(2)) +
                             ", model expects " + std::to_string(cfg.feature_count) + " features");
}

// Returns the final [B, feature_count] output, owned by the workspace.
const Tensor& apply_layers(Model& model, const double* batch, std::size_t B, bool training,
                           rng::Xoshiro256pp* rng, Workspace& ws) {
    const ModelConfig& cfg = model.config;
    const std::size_t L = cfg.layers.size();
    const kern::Kernels& k = kern::active();
    ws.layers.resize(L);
    ws.in_ptr.resize(L);

    const double* cur = batch;
    for (std::size_t i = 0; i < L; ++i) {
        const LayerSpec& ls = cfg.layers[i];
        LayerParams& p = model.params[i];
        const LayerShape& in_s = model.shapes[i];
        const LayerShape& out_s = model.shapes[i + 1];
        LayerScratch& w = ws.layers[i];
        ws.in_ptr[i] = cur;
        switch (ls.kind) {
        case LayerKind::depthwise_conv: {
            const std::size_t T = in_s.time, F = in_s.ch, M = ls.conv.filters_per_feature;
            const std::size_t K = ls.conv.kernel_size, C = F * M, OT = out_s.time;
            w.xe.ensure({B, T, C});
            detail::expand_channels(cur, B * T, F, M, w.xe.data());
            w.wk.resize(K * C);
            detail::repack_taps(p.w.data(), C, K, w.wk.data());
            w.out.ensure({B, OT, C});
            for (std::size_t b = 0; b < B; ++b)
                k.conv_fwd(w.xe.data() + b * T * C, T, C, w.wk.data(), p.b.data(), K,
                           ls.conv.stride, w.out.data() + b * OT * C, OT);
            cur = w.out.data();
            break;
        }
        case LayerKind::relu: {
            const std::size_t n = B * (in_s.flat ? in_s.ch : in_s.time * in_s.ch);
            w.out.ensure({n});
            k.relu_fwd(cur, w.out.data(), n);
            cur = w.out.data();
            break;
        }
        case LayerKind::maxpool: {
            const std::size_t T = in_s.time, C = in_s.ch, OT = out_s.time;
            w.out.ensure({B, OT, C});
            w.argmax.resize(B * OT * C);
            for (std::size_t b = 0; b < B; ++b)
                k.pool_fwd(cur + b * T * C, T, C, ls.pool, ls.pool_stride,
                           w.out.data() + b * OT * C, w.argmax.data() + b * OT * C, OT);
            cur = w.out.data();
            break;
        }
        case LayerKind::dropout: {
            if (training && rng && ls.rate > 0.0) {
                const std::size_t n = B * (in_s.flat ? in_s.ch : in_s.time * in_s.ch);
                w.out.ensure({n});
                w.mask.ensure({n});
                ops::dropout_into(cur, n, ls.rate, *rng, w.out.data(), w.mask.data());
                cur = w.out.data();
            } else {
                w.mask.ensure({0});  // identity: backward aliases too
            }
            break;
        }
        case LayerKind::batchnorm: {
            const std::size_t rows = in_s.flat ? B : B * in_s.time;
            w.bn_in.ensure({rows, in_s.ch});
            std::copy_n(cur, rows * in_s.ch, w.bn_in.data());
            w.out = ops::batchnorm1d(w.bn_in, p.gamma, p.beta, p.bn, training, ls.bn_epsilon,
                                     training ? &w.bnc : nullptr);
            cur = w.out.data();
            break;
        }
        case LayerKind::dense:
            w.out.ensure({B, ls.width});
            k.dense_fwd(cur, B, in_s.ch, p.w.data(), p.b.data(), w.out.data(), ls.width);
            cur = w.out.data();
            break;
        case LayerKind::flatten:
            break;  // same data, new geometry
        case LayerKind::feature_enrich_dense: {
            const std::size_t rows = B * in_s.time;
            w.out.ensure({B, in_s.time, ls.width});
            k.dense_fwd(cur, rows, in_s.ch, p.w.data(), p.b.data(), w.out.data(), ls.width);
            cur = w.out.data();
            break;
        }
        }
    }
    return ws.layers.back().out;
}

// Accumulates parameter gradients into `grads` (aligned with param_tensors())
// so successive chunks of one batch sum naturally.
void backprop(Model& model, Workspace& ws, std::size_t B, const Tensor& grad_out,
              std::vector<Tensor>& grads) {
    const ModelConfig& cfg = model.config;
    const kern::Kernels& k = kern::active();
    constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> slot(cfg.layers.size(), npos);
    {
        auto refs = model.param_tensors();
        for (std::size_t s = 0; s < refs.size(); ++s)
            if (slot[refs[s].layer] == npos) slot[refs[s].layer] = s;
    }

    const double* g = grad_out.data();
    for (std::size_t i = cfg.layers.size(); i-- > 0;) {
        const LayerSpec& ls = cfg.layers[i];
        LayerParams& p = model.params[i];
        const LayerShape& in_s = model.shapes[i];
        const LayerShape& out_s = model.shapes[i + 1];
        const double* in = ws.in_ptr[i];
        LayerScratch& w = ws.layers[i];
        switch (ls.kind) {
        case LayerKind::depthwise_conv: {
            const std::size_t T = in_s.time, F = in_s.ch, M = ls.conv.filters_per_feature;
            const std::size_t K = ls.conv.kernel_size, C = F * M, OT = out_s.time;
            w.gwk.assign(K * C, 0.0);
            Tensor& gw = grads[slot[i]];
            Tensor& gb = grads[slot[i] + 1];
            for (std::size_t b = 0; b < B; ++b)
                k.conv_bwd_params(w.xe.data() + b * T * C, T, g + b * OT * C, OT, C, K,
                                  ls.conv.stride, w.gwk.data(), gb.data());
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t kk = 0; kk < K; ++kk) gw[c * K + kk] += w.gwk[kk * C + c];
            if (i > 0) {
                w.gxe.ensure({B, T, C});
                std::fill_n(w.gxe.data(), B * T * C, 0.0);
                for (std::size_t b = 0; b < B; ++b)
                    k.conv_bwd_input(g + b * OT * C, OT, C, w.wk.data(), K,
                                     ls.conv.stride, w.gxe.data() + b * T * C, T);
                w.gin.ensure({B, T, F});
                detail::reduce_channels(w.gxe.data(), B * T, F, M, w.gin.data());
                g = w.gin.data();
            }
            break;
        }
        case LayerKind::relu: {
            const std::size_t n = B * (in_s.flat ? in_s.ch : in_s.time * in_s.ch);
            w.gin.ensure({n});
            k.relu_bwd(in, g, w.gin.data(), n);
            g = w.gin.data();
            break;
        }
        case LayerKind::maxpool: {
            const std::size_t T = in_s.time, C = in_s.ch, OT = out_s.time;
            w.gin.ensure({B, T, C});
            std::fill_n(w.gin.data(), B * T * C, 0.0);
            for (std::size_t b = 0; b < B; ++b)
                k.pool_bwd(g + b * OT * C, OT, C, w.argmax.data() + b * OT * C,
                           w.gin.data() + b * T * C, T);
            g = w.gin.data();
            break;
        }
        case LayerKind::dropout:
            if (w.mask.numel() != 0) {
                w.gin.ensure({w.mask.numel()});
                k.mul(g, w.mask.data(), w.gin.data(), w.mask.numel());
                g = w.gin.data();
            }
            break;
        case LayerKind::batchnorm: {
            const std::size_t rows = in_s.flat ? B : B * in_s.time;
            w.bn_g.ensure({rows, in_s.ch});
            std::copy_n(g, rows * in_s.ch, w.bn_g.data());
            ops::BatchNormGrads bg = ops::batchnorm1d_grad(w.bn_g, p.gamma, w.bnc);
            Tensor& gg = grads[slot[i]];
            Tensor& gbta = grads[slot[i] + 1];
            for (std::size_t c = 0; c < in_s.ch; ++c) {
                gg[c] += bg.grad_gamma[c];
                gbta[c] += bg.grad_beta[c];
            }
            w.gin = std::move(bg.grad_input);
            g = w.gin.data();
            break;
        }
        case LayerKind::dense: {
            k.dense_bwd_params(in, B, in_s.ch, g, ls.width,
                               grads[slot[i]].data(), grads[slot[i] + 1].data());
            if (i > 0) {
                w.gin.ensure({B, in_s.ch});
                k.dense_bwd_input(g, B, ls.width, p.w.data(), in_s.ch, w.gin.data());
                g = w.gin.data();
            }
            break;
        }
        case LayerKind::flatten:
            break;  // same data, new geometry
        case LayerKind::feature_enrich_dense: {
            const std::size_t rows = B * in_s.time;
            k.dense_bwd_params(in, rows, in_s.ch, g, ls.width,
                               grads[slot[i]].data(), grads[slot[i] + 1].data());
            if (i > 0) {
                w.gin.ensure({B, in_s.time, in_s.ch});
                k.dense_bwd_input(g, rows, ls.width, p.w.data(), in_s.ch, w.gin.data());
                g = w.gin.data();
            }
            break;
        }
        }
    }
}

// Doubles of activation storage per sample, used to size training chunks.
std::size_t per_sample_act_doubles(const Model& m) {
    std::size_t total = 0;
    for (const LayerShape& s : m.shapes) total += s.flat ? s.ch : s.time * s.ch;
    return total;
}

void check_windows_match(const Model& model, const data::WindowedDataset& ds,
                         const char* which) {
    if (ds.n != model.config.n || ds.features() != model.config.feature_count)
        throw ConfigError(std::string(which) + " windows (n=" + std::to_string(ds.n) +
                          ", features=" + std::to_string(ds.features()) +
                          ") do not match the model (n=" + std::to_string(model.config.n) +
                          ", features=" + std::to_string(model.config.feature_count) + ")");
}

// Inference chunk size: bound the workspace (which holds every layer's
// activation at once) to the same memory budget training uses.
std::size_t inference_step(const Model& m) {
    const std::size_t budget_doubles = (192ull << 20) / sizeof(double);
    const std::size_t per_sample = per_sample_act_doubles(m) + 1;
    return std::max<std::size_t>(1, std::min<std::size_t>(1024, budget_doubles / per_sample));
}

double eval_mse_chunked(Model& model, const data::WindowedDataset& ds, Workspace& ws) {
    double sse = 0.0;
    std::size_t cnt = 0;
    const std::size_t step = inference_step(model);
    for (std::size_t c0 = 0; c0 < ds.samples(); c0 += step) {
        const std::size_t c1 = std::min(ds.samples(), c0 + step);
        ds.gather(c0, c1, ws.in, ws.tgt);
        const Tensor& pred = apply_layers(model, ws.in.data(), c1 - c0, false, nullptr, ws);
        for (std::size_t j = 0; j < pred.numel(); ++j) {
            const double d = pred[j] - ws.tgt[j];
            sse += d * d;
        }
        cnt += pred.numel();
    }
    return sse / static_cast<double>(cnt);
}

}  // namespace

Tensor forward(Model& model, const Tensor& batch, bool training) {
    check_batch(model, batch);
    rng::Xoshiro256pp r(model.config.seed ^ 0xd1b54a32d192ed03ULL);
    Workspace ws;
    return apply_layers(model, batch.data(), batch.dim(0), training, training ? &r : nullptr,
                        ws);
}

double evaluate_mse(Model& model, const data::WindowedDataset& ds) {
    check_windows_match(model, ds, "evaluation");
    if (ds.samples() == 0) throw ConfigError("evaluation dataset has no samples");
    Workspace ws;
    return eval_mse_chunked(model, ds, ws);
}

LossGrads loss_gradients(Model& model, const Tensor& batch, const Tensor& target,
                         bool training) {
    check_batch(model, batch);
    rng::Xoshiro256pp r(model.config.seed ^ 0xd1b54a32d192ed03ULL);
    Workspace ws;
    const Tensor& pred =
        apply_layers(model, batch.data(), batch.dim(0), training, training ? &r : nullptr, ws);
    MseResult mse = mse_loss(pred, target);
    LossGrads out{mse.loss, zero_gradients(model)};
    backprop(model, ws, batch.dim(0), mse.grad, out.grads);
    return out;
}

Tensor predict(Model& model, const data::WindowedDataset& ds) {
    check_windows_match(model, ds, "prediction");
    const std::size_t F = model.config.feature_count;
    Tensor out({ds.samples(), F});
    Workspace ws;
    const std::size_t step = inference_step(model);
    for (std::size_t c0 = 0; c0 < ds.samples(); c0 += step) {
        const std::size_t c1 = std::min(ds.samples(), c0 + step);
        ds.gather(c0, c1, ws.in, ws.tgt);
        const Tensor& pred = apply_layers(model, ws.in.data(), c1 - c0, false, nullptr, ws);
        std::copy_n(pred.data(), pred.numel(), out.data() + c0 * F);
    }
    return out;
}

MseResult mse_loss(const Tensor& pred, const Tensor& target) {
    if (!pred.same_shape(target))
        throw DimensionError("mse_loss: prediction shape " + pred.shape_str() +
                             " does not match target shape " + target.shape_str());
    if (pred.numel() == 0) throw DimensionError("mse_loss: empty tensors");
    const double inv = 1.0 / static_cast<double>(pred.numel());
    MseResult r{0.0, Tensor(pred.shape())};
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred[i] - target[i];
        sse += d * d;
        r.grad[i] = 2.0 * d * inv;
    }
    r.loss = sse * inv;
    return r;
}

double decayed_lr(const TrainConfig& cfg, std::size_t epoch) {
    if (cfg.decay_period_epochs < 1) throw ConfigError("decay_period_epochs must be at least 1");
    const std::size_t steps = epoch / cfg.decay_period_epochs;
    return cfg.initial_learning_rate * std::pow(cfg.decay_rate, static_cast<double>(steps));
}

void adam_step(Model& model, const std::vector<Tensor>& grads, const TrainConfig& cfg,
               double learning_rate) {
    auto refs = model.param_tensors();
    if (grads.size() != refs.size())
        throw DimensionError("adam_step: got " + std::to_string(grads.size()) +
                             " gradient tensors for " + std::to_string(refs.size()) +
                             " parameter tensors");
    AdamState& a = model.adam;
    if (a.m.size() != refs.size() || a.v.size() != refs.size())
        throw DimensionError("adam_step: optimizer state does not match the model");
    for (std::size_t s = 0; s < refs.size(); ++s) {
        if (!grads[s].same_shape(*refs[s].tensor))
            throw DimensionError("adam_step: gradient " + std::to_string(s) + " has shape " +
                                 grads[s].shape_str() + ", parameter has " +
                                 refs[s].tensor->shape_str());
        for (double v : grads[s].vec())
            if (!std::isfinite(v))
                throw TrainError("non-finite gradient in layer " +
                                     std::to_string(refs[s].layer + 1) + " (" +
                                     kind_name(model.config.layers[refs[s].layer].kind) + ")",
                                 static_cast<long>(refs[s].layer + 1));
    }
    ++a.t;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(a.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(a.t));
    for (std::size_t s = 0; s < refs.size(); ++s) {
        double* m = a.m[s].data();
        double* v = a.v[s].data();
        double* p = refs[s].tensor->data();
        const double* g = grads[s].data();
        const std::size_t n = refs[s].tensor->numel();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
        }
    }
}

TrainHistory train(Model& model, const data::WindowedDataset& train_set,
                   const data::WindowedDataset& val_set, const TrainConfig& cfg,
                   const EpochCallback& on_epoch) {
    if (!(cfg.initial_learning_rate > 0.0 && cfg.initial_learning_rate < 1.0))
        throw ConfigError("initial_learning_rate must be in (0,1), got " +
                          std::to_string(cfg.initial_learning_rate));
    if (!(cfg.decay_rate > 0.0 && cfg.decay_rate <= 1.0))
        throw ConfigError("decay_rate must be in (0,1], got " + std::to_string(cfg.decay_rate));
    if (cfg.decay_period_epochs < 1) throw ConfigError("decay_period_epochs must be at least 1");
    if (train_set.samples() == 0) throw ConfigError("training dataset has no samples");
    if (val_set.samples() == 0) throw ConfigError("validation dataset has no samples");
    check_windows_match(model, train_set, "training");
    check_windows_match(model, val_set, "validation");

    const std::size_t F = model.config.feature_count;
    bool has_bn = false;
    for (const LayerSpec& ls : model.config.layers)
        if (ls.kind == LayerKind::batchnorm) has_bn = true;

    // Chunk size: gradient accumulation over fixed-size chunks is exact for
    // chain-rule layers, so chunks only bound activation memory. Batchnorm
    // needs whole-batch statistics, so those models run each batch in one
    // piece (use more batches if memory is tight).
    const std::size_t budget_doubles = (192ull << 20) / sizeof(double);
    const std::size_t per_sample = 3 * per_sample_act_doubles(model) + 1;
    const std::size_t chunk_cap =
        std::max<std::size_t>(1, std::min<std::size_t>(256, budget_doubles / per_sample));

    rng::Xoshiro256pp drop_rng(model.config.seed ^ 0x9e3779b97f4a7c15ULL);
    TrainHistory hist;
    Model best;
    EarlyStopper stopper(cfg.early_stop_patience);
    Workspace ws, val_ws;

    for (std::size_t e = 1; e <= cfg.max_epochs; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = decayed_lr(cfg, e - 1);

        double sse = 0.0;
        std::size_t cnt = 0;
        for (const data::BatchMeta& bm : train_set.batches) {
            if (bm.sample_end == bm.sample_begin) continue;
            const std::size_t bs = bm.sample_end - bm.sample_begin;
            const std::size_t total_elems = bs * F;
            const std::size_t step = has_bn ? bs : std::min(bs, chunk_cap);
            std::vector<Tensor> grads = zero_gradients(model);
            double batch_sse = 0.0;
            for (std::size_t c0 = bm.sample_begin; c0 < bm.sample_end; c0 += step) {
                const std::size_t c1 = std::min(bm.sample_end, c0 + step);
                train_set.gather(c0, c1, ws.in, ws.tgt);
                const Tensor& pred = apply_layers(model, ws.in.data(), c1 - c0, true,
                                                  &drop_rng, ws);
                ws.gout.ensure({c1 - c0, F});
                for (std::size_t j = 0; j < pred.numel(); ++j) {
                    const double d = pred[j] - ws.tgt[j];
                    batch_sse += d * d;
                    ws.gout[j] = 2.0 * d / static_cast<double>(total_elems);
                }
                backprop(model, ws, c1 - c0, ws.gout, grads);
            }
            if (!std::isfinite(batch_sse))
                throw TrainError(
                    "training diverged (non-finite loss) at epoch " + std::to_string(e),
                    static_cast<long>(e));
            adam_step(model, grads, cfg, lr);
            sse += batch_sse;
            cnt += total_elems;
        }
        const double train_loss = sse / static_cast<double>(cnt);
        const double val_loss = eval_mse_chunked(model, val_set, val_ws);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (!std::isfinite(train_loss) || !std::isfinite(val_loss))
            throw TrainError("training diverged (non-finite loss) at epoch " + std::to_string(e),
                             static_cast<long>(e));
        hist.train_loss.push_back(train_loss);
        hist.val_loss.push_back(val_loss);
        hist.seconds.push_back(secs);
        if (on_epoch) on_epoch(e, train_loss, val_loss, secs);

        const bool improved = val_loss < stopper.best;
        const bool stop = stopper.update(e, val_loss);
        if (improved) {
            hist.best_epoch = e;
            best = model;
        }
        // Good enough: once validation RMSE reaches the requested target the
        // remaining epochs only chase diminishing returns.
        if (cfg.target_val_rmse > 0.0 && std::sqrt(val_loss) <= cfg.target_val_rmse) break;
        if (stop) break;
    }

    // Leave the model at its best-validation point (parameters and batchnorm
    // running stats; the optimizer state stays at the stopping point).
    if (hist.best_epoch != 0) model.params = best.params;
    return hist;
}

}  // namespace icsad::nn
