#include "icsad/run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include <json.hpp>

#include "icsad/errors.hpp"

namespace icsad::cfg {
namespace {

using nlohmann::json;

// Strictness gate: every object must carry only keys we know, so a typo
// like "treshold" is an error instead of a silently ignored setting.
void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("unknown key \"" + item.key() + "\" in " + where);
    }
}

json require_object(const json& parent, const std::string& where, const char* key) {
    const json& v = parent.at(key);
    if (!v.is_object())
        throw ConfigError(where + "." + key + " must be an object");
    return v;
}

template <typename T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for " + where + "." + key);
    }
}

void parse_model(const json& j, ModelSettings& m) {
    check_keys(j, "model",
               {"conv_blocks", "base_filters", "kernel", "window_length", "batchnorm",
                "dropout_rate"});
    read(j, "model", "conv_blocks", m.conv_blocks);
    read(j, "model", "base_filters", m.base_filters);
    read(j, "model", "kernel", m.kernel);
    read(j, "model", "window_length", m.window_length);
    read(j, "model", "batchnorm", m.batchnorm);
    read(j, "model", "dropout_rate", m.dropout_rate);
}

void parse_train(const json& j, nn::TrainConfig& t) {
    check_keys(j, "train",
               {"max_epochs", "initial_learning_rate", "decay_rate",
                "decay_period_epochs", "early_stop_patience", "adam_beta1",
                "adam_beta2", "adam_epsilon", "batch_count", "target_val_rmse"});
    read(j, "train", "max_epochs", t.max_epochs);
    read(j, "train", "initial_learning_rate", t.initial_learning_rate);
    read(j, "train", "decay_rate", t.decay_rate);
    read(j, "train", "decay_period_epochs", t.decay_period_epochs);
    read(j, "train", "early_stop_patience", t.early_stop_patience);
    read(j, "train", "adam_beta1", t.adam_beta1);
    read(j, "train", "adam_beta2", t.adam_beta2);
    read(j, "train", "adam_epsilon", t.adam_epsilon);
    read(j, "train", "batch_count", t.batch_count);
    read(j, "train", "target_val_rmse", t.target_val_rmse);
}

void parse_preprocess(const json& j, PreprocessSettings& p) {
    check_keys(j, "preprocess", {"warmup_records", "train_fraction"});
    read(j, "preprocess", "warmup_records", p.warmup_records);
    read(j, "preprocess", "train_fraction", p.train_fraction);
}

void parse_augment(const json& j, data::AugmentConfig& a) {
    check_keys(j, "augment", {"enabled", "lag"});
    read(j, "augment", "enabled", a.enabled);
    read(j, "augment", "lag", a.lag);
}

void parse_detector(const json& j, det::DetectorConfig& d) {
    check_keys(j, "detector", {"threshold", "window", "sigma_floor"});
    read(j, "detector", "threshold", d.threshold);
    read(j, "detector", "window", d.window);
    read(j, "detector", "sigma_floor", d.sigma_floor);
}

void parse_evaluation(const json& j, EvalSettings& e) {
    check_keys(j, "evaluation", {"mode", "extension_seconds", "include_ineffective"});
    if (j.contains("mode")) {
        std::string name;
        read(j, "evaluation", "mode", name);
        e.mode = mode_from_name(name);
    }
    read(j, "evaluation", "extension_seconds", e.extension_seconds);
    read(j, "evaluation", "include_ineffective", e.include_ineffective);
}

void parse_grid(const json& j, GridSettings& g) {
    check_keys(j, "grid", {"thresholds", "windows", "runs", "jobs"});
    read(j, "grid", "thresholds", g.thresholds);
    read(j, "grid", "windows", g.windows);
    read(j, "grid", "runs", g.runs);
    read(j, "grid", "jobs", g.jobs);
    if (g.thresholds.empty()) throw ConfigError("grid.thresholds must not be empty");
    if (g.windows.empty()) throw ConfigError("grid.windows must not be empty");
    if (g.runs == 0) throw ConfigError("grid.runs must be at least 1");
}

void parse_paths(const json& j, Paths& p) {
    check_keys(j, "paths", {"data", "model", "out", "reports"});
    read(j, "paths", "data", p.data);
    read(j, "paths", "model", p.model);
    read(j, "paths", "out", p.out);
    read(j, "paths", "reports", p.reports);
}

}  // namespace

const char* mode_name(eval::ScoreMode mode) {
    return mode == eval::ScoreMode::attack_based ? "attack" : "record";
}

eval::ScoreMode mode_from_name(const std::string& name) {
    if (name == "attack") return eval::ScoreMode::attack_based;
    if (name == "record") return eval::ScoreMode::record_based;
    throw ConfigError("evaluation mode must be \"attack\" or \"record\", got \"" +
                      name + "\"");
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");

    check_keys(j, origin,
               {"seed", "stage", "model", "train", "preprocess", "augment",
                "detector", "evaluation", "grid", "paths"});

    RunConfig c;
    read(j, origin, "seed", c.seed);
    read(j, origin, "stage", c.stage);
    if (j.contains("model")) parse_model(require_object(j, origin, "model"), c.model);
    if (j.contains("train")) parse_train(require_object(j, origin, "train"), c.train);
    if (j.contains("preprocess"))
        parse_preprocess(require_object(j, origin, "preprocess"), c.preprocess);
    if (j.contains("augment"))
        parse_augment(require_object(j, origin, "augment"), c.augment);
    if (j.contains("detector"))
        parse_detector(require_object(j, origin, "detector"), c.detector);
    if (j.contains("evaluation"))
        parse_evaluation(require_object(j, origin, "evaluation"), c.evaluation);
    if (j.contains("grid")) parse_grid(require_object(j, origin, "grid"), c.grid);
    if (j.contains("paths")) parse_paths(require_object(j, origin, "paths"), c.paths);

    if (c.model.conv_blocks == 0) throw ConfigError("model.conv_blocks must be >= 1");
    if (c.model.kernel < 2) throw ConfigError("model.kernel must be >= 2");
    if (c.model.window_length < 2)
        throw ConfigError("model.window_length must be >= 2");
    if (!(c.model.dropout_rate >= 0.0 && c.model.dropout_rate < 1.0))
        throw ConfigError("model.dropout_rate must be in [0, 1)");
    if (!(c.preprocess.train_fraction > 0.0 && c.preprocess.train_fraction < 1.0))
        throw ConfigError("preprocess.train_fraction must be in (0, 1)");
    if (c.train.batch_count == 0) throw ConfigError("train.batch_count must be >= 1");
    if (c.detector.window == 0) throw ConfigError("detector.window must be >= 1");
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path);
}

std::string resolved_config(const RunConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["stage"] = c.stage;
    j["model"] = {{"conv_blocks", c.model.conv_blocks},
                  {"base_filters", c.model.base_filters},
                  {"kernel", c.model.kernel},
                  {"window_length", c.model.window_length},
                  {"batchnorm", c.model.batchnorm},
                  {"dropout_rate", c.model.dropout_rate}};
    j["train"] = {{"max_epochs", c.train.max_epochs},
                  {"initial_learning_rate", c.train.initial_learning_rate},
                  {"decay_rate", c.train.decay_rate},
                  {"decay_period_epochs", c.train.decay_period_epochs},
                  {"early_stop_patience", c.train.early_stop_patience},
                  {"adam_beta1", c.train.adam_beta1},
                  {"adam_beta2", c.train.adam_beta2},
                  {"adam_epsilon", c.train.adam_epsilon},
                  {"batch_count", c.train.batch_count},
                  {"target_val_rmse", c.train.target_val_rmse}};
    j["preprocess"] = {{"warmup_records", c.preprocess.warmup_records},
                       {"train_fraction", c.preprocess.train_fraction}};
    j["augment"] = {{"enabled", c.augment.enabled}, {"lag", c.augment.lag}};
    j["detector"] = {{"threshold", c.detector.threshold},
                     {"window", c.detector.window},
                     {"sigma_floor", c.detector.sigma_floor}};
    j["evaluation"] = {{"mode", mode_name(c.evaluation.mode)},
                       {"extension_seconds", c.evaluation.extension_seconds},
                       {"include_ineffective", c.evaluation.include_ineffective}};
    j["grid"] = {{"thresholds", c.grid.thresholds},
                 {"windows", c.grid.windows},
                 {"runs", c.grid.runs},
                 {"jobs", c.grid.jobs}};
    j["paths"] = {{"data", c.paths.data},
                  {"model", c.paths.model},
                  {"out", c.paths.out},
                  {"reports", c.paths.reports}};
    return j.dump(2) + "\n";
}

nn::ModelConfig to_model_config(const RunConfig& c, std::size_t feature_count) {
    return nn::paper_cnn(c.model.conv_blocks, c.model.base_filters, c.model.kernel,
                         c.model.window_length, feature_count, c.seed,
                         c.model.batchnorm, c.model.dropout_rate);
}

}  // namespace icsad::cfg
