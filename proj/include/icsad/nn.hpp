#pragma once

// Model assembly, training and inference: composes the layer ops into the
// depthwise-CNN predictor family, trains with MSE + Adam under a step-
// exponential learning-rate decay with early stopping, and keeps everything
// deterministic under a fixed seed.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "icsad/data.hpp"
#include "icsad/tensor.hpp"
#include "icsad/tensor_ops.hpp"

namespace icsad::nn {

enum class LayerKind {
    depthwise_conv,
    relu,
    maxpool,
    dropout,
    batchnorm,
    dense,
    flatten,
    feature_enrich_dense,
};

const char* kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind{};
    ops::ConvSpec conv{};                    // depthwise_conv
    std::size_t pool = 2, pool_stride = 2;   // maxpool
    double rate = 0.25;                      // dropout
    std::size_t width = 0;                   // dense / feature_enrich_dense
    double bn_momentum = 0.9, bn_epsilon = 1e-5;

    static LayerSpec Conv(std::size_t kernel, std::size_t filters, std::size_t stride = 1);
    static LayerSpec Relu();
    static LayerSpec MaxPool(std::size_t pool = 2, std::size_t stride = 2);
    static LayerSpec Dropout(double rate = 0.25);
    static LayerSpec BatchNorm(double momentum = 0.9, double epsilon = 1e-5);
    static LayerSpec Dense(std::size_t width);
    static LayerSpec Flatten();
    static LayerSpec FeatureEnrich(std::size_t width);
};

struct ModelConfig {
    std::vector<LayerSpec> layers;
    std::size_t n = 0;              // input sequence length
    std::size_t feature_count = 0;  // input features == predicted features
    std::uint64_t seed = 0;
};

// The classic block stack: per block depthwise conv (kernel `kernel`,
// filters doubling per block: base, then x2 relative to current channels)
// [+ batchnorm] + relu + maxpool(2,2); then dropout, flatten, and a dense
// readout of feature_count units.
ModelConfig paper_cnn(std::size_t conv_blocks, std::size_t base_filters,
                      std::size_t kernel, std::size_t n, std::size_t feature_count,
                      std::uint64_t seed, bool batchnorm = false,
                      double dropout_rate = 0.25);

struct TrainConfig {
    std::size_t max_epochs = 100;
    double initial_learning_rate = 0.001;
    double decay_rate = 0.95;
    std::size_t decay_period_epochs = 1;
    std::size_t early_stop_patience = 5;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_epsilon = 1e-8;
    std::size_t batch_count = 8;  // consumed by the data pipeline; echoed in reports
    double target_val_rmse = 0.0;  // > 0: stop once validation RMSE reaches this
};

struct AdamState {
    std::vector<Tensor> m, v;  // aligned with Model::param_tensors()
    std::uint64_t t = 0;
};

// Activation geometry entering a layer: [time, ch] sequence mode or a
// flattened vector of `ch` units.
struct LayerShape {
    std::size_t time = 0, ch = 0;
    bool flat = false;
};

struct LayerParams {
    Tensor w, b;         // conv: w [F, filters, K], b [F*filters]; dense: w [in,out], b [out]
    Tensor gamma, beta;  // batchnorm
    ops::BatchNormState bn;
};

struct Model {
    ModelConfig config;
    std::vector<LayerParams> params;  // one entry per layer (may be empty)
    std::vector<LayerShape> shapes;   // size layers+1; shapes[i] enters layer i
    AdamState adam;

    // Trainable tensors in declaration order, with the owning layer index.
    struct ParamRef {
        Tensor* tensor;
        std::size_t layer;
    };
    struct ConstParamRef {
        const Tensor* tensor;
        std::size_t layer;
    };
    std::vector<ParamRef> param_tensors();
    std::vector<ConstParamRef> param_tensors() const;
    std::size_t param_count() const;  // total scalar parameters
};

struct TrainHistory {
    std::vector<double> train_loss, val_loss, seconds;
    std::size_t best_epoch = 0;  // 1-based; 0 = no epoch ran

    std::size_t epochs() const { return train_loss.size(); }
};

// Validates the shape chain (ConfigError names the first invalid layer) and
// initializes parameters from the seed: He-style fan-in scaled uniform
// weights, zero biases, identity batchnorm.
Model build_model(const ModelConfig& config);

// batch [B, n, F] -> predictions [B, F]. Training mode applies dropout
// (rng derived from config.seed) and batch statistics; inference uses
// running stats and no dropout.
Tensor forward(Model& model, const Tensor& batch, bool training);

// Inference over every sample of a windowed dataset, in chunks.
Tensor predict(Model& model, const data::WindowedDataset& ds);

struct MseResult {
    double loss;
    Tensor grad;  // d loss / d pred = 2 (pred - target) / count
};
MseResult mse_loss(const Tensor& pred, const Tensor& target);

// Mean squared error of the model over a whole windowed dataset (inference
// mode), evaluated in chunks.
double evaluate_mse(Model& model, const data::WindowedDataset& ds);

// Loss and parameter gradients of mse_loss(forward(batch), target) in one
// pass; the workhorse behind train() and the gradient-verification tests.
// In training mode dropout masks come from an rng reseeded per call, so
// repeated calls see identical masks (finite differencing stays valid).
struct LossGrads {
    double loss;
    std::vector<Tensor> grads;  // aligned with param_tensors()
};
LossGrads loss_gradients(Model& model, const Tensor& batch, const Tensor& target,
                         bool training = false);

// Gradient tensors aligned with param_tensors(), zero-initialized.
std::vector<Tensor> zero_gradients(Model& model);

// Standard Adam with bias correction; one step per call. Non-finite
// gradients raise TrainError carrying the layer index.
void adam_step(Model& model, const std::vector<Tensor>& grads, const TrainConfig& cfg,
               double learning_rate);

// initial_learning_rate * decay_rate^(epoch / decay_period_epochs), integer division
double decayed_lr(const TrainConfig& cfg, std::size_t epoch);

// The early-stopping bookkeeping train() runs each epoch, kept pure so the
// rule itself is directly testable: strict improvement resets the
// no-improvement streak; once the streak reaches `patience`, stop.
struct EarlyStopper {
    std::size_t patience;
    double best = 1e308;
    std::size_t best_epoch = 0;  // 1-based
    std::size_t streak = 0;

    explicit EarlyStopper(std::size_t patience_epochs) : patience(patience_epochs) {}

    // Returns true when training should stop after this epoch.
    bool update(std::size_t epoch, double val_loss) {
        if (val_loss < best) {
            best = val_loss;
            best_epoch = epoch;
            streak = 0;
            return false;
        }
        return ++streak >= patience;
    }
};

// Called after every epoch with (epoch, train_loss, val_loss, seconds);
// lets callers stream progress without touching the training loop.
using EpochCallback =
    std::function<void(std::size_t, double, double, double)>;

// Batched training driven by the windowed dataset's batch layout (fixed
// order, no shuffling). Stops on patience epochs without validation
// improvement, when validation RMSE reaches cfg.target_val_rmse (if set),
// or at max_epochs; the model is left holding the parameters of the
// best-validation epoch. Non-finite losses raise TrainError with the epoch
// index.
TrainHistory train(Model& model, const data::WindowedDataset& train_set,
                   const data::WindowedDataset& val_set, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

}  // namespace icsad::nn
