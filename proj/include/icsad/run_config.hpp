#pragma once

// One structured config file for the whole toolkit: the architecture recipe,
// training schedule, preprocessing knobs, detector and grid settings,
// evaluation mode, paths and the seed. Parsing is strict — unknown keys are
// errors, so typos fail loudly — and every parsed config can be serialized
// back as a resolved echo that parses to the same configuration and hence
// reproduces the same run.

#include <cstdint>
#include <string>

#include "icsad/data.hpp"
#include "icsad/detector.hpp"
#include "icsad/evaluator.hpp"
#include "icsad/nn.hpp"

namespace icsad::cfg {

// Architecture recipe in block terms; the concrete layer list comes from
// nn::paper_cnn once the data tells us the feature count.
struct ModelSettings {
    std::size_t conv_blocks = 4;
    std::size_t base_filters = 32;
    std::size_t kernel = 2;
    // n: records per input window. 47 keeps every conv output length even
    // through all four pool stages, so no timestep is dropped; in particular
    // the newest record survives to the readout, which even-length windows
    // lose at the first pool.
    std::size_t window_length = 47;
    bool batchnorm = false;
    double dropout_rate = 0.05;
};

// Training defaults tuned on the benchmark suite: more, smaller batches give
// proportionally more optimizer steps per epoch at identical gradient cost.
inline nn::TrainConfig default_train_config() {
    nn::TrainConfig t;
    t.initial_learning_rate = 0.002;
    t.decay_rate = 0.99;
    t.early_stop_patience = 8;
    t.batch_count = 32;
    return t;
}

struct PreprocessSettings {
    std::size_t warmup_records = 0;  // leading records dropped before scaling
    double train_fraction = 0.8;     // chronological train/val split
};

struct EvalSettings {
    eval::ScoreMode mode = eval::ScoreMode::attack_based;
    double extension_seconds = 300.0;
    bool include_ineffective = false;  // count attacks the plant neutralized?
};

struct GridSettings {
    std::vector<double> thresholds = eval::GridSpec{}.thresholds;
    std::vector<std::size_t> windows = eval::GridSpec{}.windows;
    std::size_t runs = 1;  // training runs averaged per cell (seed, seed+1, ...)
    std::size_t jobs = 1;  // worker threads scoring grid cells
};

struct Paths {
    std::string data;   // dataset file or benchmark directory
    std::string model;  // model file
    std::string out;    // output directory
    std::vector<std::string> reports;  // detection reports consumed by eval
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string stage;  // train/detect on this stage's features; empty = all
    ModelSettings model;
    nn::TrainConfig train = default_train_config();
    PreprocessSettings preprocess;
    data::AugmentConfig augment;
    det::DetectorConfig detector;
    EvalSettings evaluation;
    GridSettings grid;
    Paths paths;
};

// Parse JSON text; `origin` names the source in diagnostics. Every key is
// optional (defaults above apply); unknown keys raise ConfigError.
RunConfig parse_run_config(const std::string& text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

// Resolved echo: JSON carrying every field. parse(resolved_config(c)) == c
// field-for-field, including exact double values.
std::string resolved_config(const RunConfig& c);

// Materialize the layer list for `feature_count` input features.
nn::ModelConfig to_model_config(const RunConfig& c, std::size_t feature_count);

const char* mode_name(eval::ScoreMode mode);
eval::ScoreMode mode_from_name(const std::string& name);  // "attack" | "record"

}  // namespace icsad::cfg
