// icsad — train a 1D-CNN predictor on attack-free process data and flag
// windows whose normalized prediction error stays above a threshold.
//
// Commands: simulate | train | detect | eval | grid. Diagnostics go to
// stderr; stdout and the output files carry only results. Every command
// writes a resolved-config echo next to its outputs, and feeding that echo
// back via --config reproduces the run byte for byte.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icsad/data.hpp"
#include "icsad/detector.hpp"
#include "icsad/errors.hpp"
#include "icsad/evaluator.hpp"
#include "icsad/model_io.hpp"
#include "icsad/nn.hpp"
#include "icsad/plant.hpp"
#include "icsad/reports.hpp"
#include "icsad/run_config.hpp"

namespace {

using namespace icsad;
namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// schema inference

// Stage tags are not stored in CSV files, so reconstruct them from feature
// names: prefer the plant layout (per stage s: LIT<s>01, FIT<s>01, MV<s>01,
// P<s>01, plus the discharge sensor assigned to the last stage); otherwise
// tag each feature "P" + its first digit, which matches SWaT-style names
// (FIT101 -> P1, AIT503 -> P5).
data::Schema infer_schema(const std::vector<std::string>& features) {
    for (std::size_t s = 1; s <= 16; ++s) {
        data::Schema trial = plant::plant_schema(s);
        if (trial.stages.size() != features.size()) continue;
        bool all = true;
        for (const auto& [name, tag] : trial.stages)
            if (std::find(features.begin(), features.end(), name) == features.end()) {
                all = false;
                break;
            }
        if (all) return trial;
    }
    data::Schema schema;
    for (const std::string& f : features) {
        std::string tag;
        for (char ch : f)
            if (std::isdigit(static_cast<unsigned char>(ch))) {
                tag = std::string("P") + ch;
                break;
            }
        schema.stages.emplace_back(f, tag);
    }
    return schema;
}

// Columns by name, in the requested order; a model uses this to pull exactly
// the features it was trained on out of a new file.
data::RawDataset select_features(const data::RawDataset& ds,
                                 const std::vector<std::string>& names) {
    std::vector<std::size_t> idx;
    for (const std::string& name : names) {
        auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(), name);
        if (it == ds.feature_names.end())
            throw DataError("dataset is missing feature column '" + name +
                            "' required by the model");
        idx.push_back(static_cast<std::size_t>(it - ds.feature_names.begin()));
    }
    data::RawDataset out;
    out.timestamps = ds.timestamps;
    out.labels = ds.labels;
    out.attack_table = ds.attack_table;
    out.feature_names = names;
    out.values = Tensor({ds.records(), names.size()});
    for (std::size_t r = 0; r < ds.records(); ++r)
        for (std::size_t i = 0; i < names.size(); ++i)
            out.values[r * names.size() + i] = ds.values[r * ds.features() + idx[i]];
    return out;
}

// ---------------------------------------------------------------------------
// the preprocessing recipe a model file carries, so `detect` needs nothing
// but the model and a CSV

struct PipelineRecipe {
    std::string stage;                  // "" = all features
    std::vector<std::string> features;  // input columns, pre-augmentation
    data::ScalingParams scaling;        // fitted on the training file
    data::AugmentConfig augment;
    std::size_t n = 0;                       // window length
    std::vector<std::string> model_features; // post-augmentation column names
    det::ErrorStats stats;                   // fitted on the validation split
    det::DetectorConfig detector;            // settings chosen at training time
};

std::vector<double> tensor_to_vec(const Tensor& t) {
    return std::vector<double>(t.data(), t.data() + t.numel());
}

json recipe_to_json(const PipelineRecipe& r) {
    return {{"stage", r.stage},
            {"features", r.features},
            {"scaling", {{"min", r.scaling.min_v}, {"max", r.scaling.max_v}}},
            {"augment", {{"enabled", r.augment.enabled}, {"lag", r.augment.lag}}},
            {"window_length", r.n},
            {"model_features", r.model_features},
            {"error_stats",
             {{"mu", tensor_to_vec(r.stats.mu)},
              {"sigma", tensor_to_vec(r.stats.sigma)},
              {"fitted_on", r.stats.fitted_on}}},
            {"detector",
             {{"threshold", r.detector.threshold},
              {"window", r.detector.window},
              {"sigma_floor", r.detector.sigma_floor}}}};
}

PipelineRecipe recipe_from_json(const json& extras, const std::string& origin) {
    if (!extras.contains("pipeline"))
        throw DataError(origin + ": model file carries no preprocessing recipe; "
                                 "was it written by `icsad train`?");
    const json& j = extras.at("pipeline");
    PipelineRecipe r;
    try {
        r.stage = j.at("stage").get<std::string>();
        r.features = j.at("features").get<std::vector<std::string>>();
        r.scaling.min_v = j.at("scaling").at("min").get<std::vector<double>>();
        r.scaling.max_v = j.at("scaling").at("max").get<std::vector<double>>();
        r.augment.enabled = j.at("augment").at("enabled").get<bool>();
        r.augment.lag = j.at("augment").at("lag").get<std::size_t>();
        r.n = j.at("window_length").get<std::size_t>();
        r.model_features = j.at("model_features").get<std::vector<std::string>>();
        auto mu = j.at("error_stats").at("mu").get<std::vector<double>>();
        auto sigma = j.at("error_stats").at("sigma").get<std::vector<double>>();
        r.stats.mu = Tensor({mu.size()});
        r.stats.sigma = Tensor({sigma.size()});
        std::copy(mu.begin(), mu.end(), r.stats.mu.data());
        std::copy(sigma.begin(), sigma.end(), r.stats.sigma.data());
        r.stats.fitted_on = j.at("error_stats").at("fitted_on").get<std::size_t>();
        r.detector.threshold = j.at("detector").at("threshold").get<double>();
        r.detector.window = j.at("detector").at("window").get<std::size_t>();
        r.detector.sigma_floor = j.at("detector").at("sigma_floor").get<double>();
    } catch (const json::exception& e) {
        throw DataError(origin + ": malformed preprocessing recipe: " + e.what());
    }
    return r;
}

data::RawDataset preprocess(const data::RawDataset& raw, const PipelineRecipe& r) {
    data::RawDataset prep = select_features(raw, r.features);
    prep = data::apply_minmax(prep, r.scaling);
    if (r.augment.enabled) prep = data::augment_lag_diff(prep, r.augment);
    return prep;
}

// ---------------------------------------------------------------------------
// shared pipeline stages

struct FitResult {
    nn::Model model;
    PipelineRecipe recipe;
    nn::TrainHistory history;
};

// The whole training pipeline on an in-memory dataset: stage selection,
// warm-up trim, scaling, augmentation, chronological split, windowing,
// training, and error statistics on the validation split.
FitResult fit_pipeline(const cfg::RunConfig& c, const data::RawDataset& raw,
                       const data::Schema& schema, std::uint64_t seed, bool verbose) {
    data::RawDataset sel =
        c.stage.empty() ? raw : data::select_stage(raw, schema, c.stage);
    if (c.preprocess.warmup_records > 0)
        sel = data::trim_warmup(sel, c.preprocess.warmup_records);

    PipelineRecipe r;
    r.stage = c.stage;
    r.features = sel.feature_names;
    r.scaling = data::fit_minmax(sel);
    r.augment = c.augment;
    r.n = c.model.window_length;
    r.detector = c.detector;

    data::RawDataset scaled = data::apply_minmax(sel, r.scaling);
    if (r.augment.enabled) scaled = data::augment_lag_diff(scaled, r.augment);
    r.model_features = scaled.feature_names;

    auto split = data::split_train_val(scaled, c.preprocess.train_fraction);
    const std::size_t n = r.n;
    data::WindowedDataset wtr = data::window_samples(
        split.first, n,
        data::make_batches_with_extension(split.first.records(), c.train.batch_count, n));
    data::WindowedDataset wva = data::window_samples(
        split.second, n,
        data::make_batches_with_extension(split.second.records(), 1, n));

    cfg::RunConfig seeded = c;
    seeded.seed = seed;
    FitResult fit{nn::build_model(cfg::to_model_config(seeded, scaled.features())), {}, {}};
    if (verbose)
        std::fprintf(stderr, "training %zu parameters on %zu windows (%zu features)\n",
                     fit.model.param_count(), wtr.samples(), scaled.features());

    nn::EpochCallback progress;
    if (verbose)
        progress = [](std::size_t e, double tr, double va, double s) {
            std::fprintf(stderr, "epoch %3zu  train %.6f  val %.6f  (%.1fs)\n", e, tr,
                         va, s);
        };
    fit.history = nn::train(fit.model, wtr, wva, c.train, progress);

    Tensor val_pred = nn::predict(fit.model, wva);
    Tensor val_err = det::prediction_errors(val_pred, wva.targets());
    r.stats = det::fit_error_stats(val_err, c.detector.sigma_floor);
    fit.recipe = std::move(r);
    return fit;
}

struct Scores {
    Tensor z;                                   // [samples, model features]
    std::vector<std::size_t> sample_to_record;  // indices into the raw file
    std::vector<double> max_z;                  // per-sample max across features
};

Scores score_dataset(nn::Model& model, const PipelineRecipe& r,
                     const data::RawDataset& raw) {
    data::RawDataset prep = preprocess(raw, r);
    if (prep.features() != model.config.feature_count)
        throw DataError("model expects " + std::to_string(model.config.feature_count) +
                        " features but the preprocessed dataset has " +
                        std::to_string(prep.features()));
    if (prep.records() <= r.n)
        throw DataError("dataset has " + std::to_string(prep.records()) +
                        " usable records; need more than the window length " +
                        std::to_string(r.n));
    data::WindowedDataset w = data::window_samples(
        prep, r.n, data::make_batches_with_extension(prep.records(), 1, r.n));
    Tensor pred = nn::predict(model, w);
    Tensor err = det::prediction_errors(pred, w.targets());

    Scores s;
    s.z = det::zscores(err, r.stats);
    // augmentation drops the first `lag` records, shifting every index
    const std::size_t offset = r.augment.enabled ? r.augment.lag : 0;
    s.sample_to_record.reserve(w.samples());
    for (std::size_t t : w.target_records) s.sample_to_record.push_back(t + offset);
    const std::size_t F = s.z.dim(1);
    s.max_z.reserve(w.samples());
    for (std::size_t i = 0; i < w.samples(); ++i) {
        double m = s.z[i * F];
        for (std::size_t f = 1; f < F; ++f) m = std::max(m, s.z[i * F + f]);
        s.max_z.push_back(m);
    }
    return s;
}

void write_resolved(const cfg::RunConfig& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << cfg::resolved_config(c);
}

std::string require_path(const std::string& value, const char* flag, const char* what) {
    if (value.empty())
        throw ConfigError(std::string(what) + " required: pass " + flag +
                          " or set it in the config file");
    return value;
}

// ---------------------------------------------------------------------------
// commands

int cmd_simulate(cfg::RunConfig c) {
    const fs::path out = require_path(c.paths.out, "--out", "output directory");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " +
                          ec.message());

    std::fprintf(stderr, "simulating benchmark suite (seed %llu)\n",
                 static_cast<unsigned long long>(c.seed));
    plant::Benchmark bench = plant::standard_benchmark(c.seed);
    data::save_csv((out / "train.csv").string(), bench.train, bench.schema);
    data::save_csv((out / "test.csv").string(), bench.test, bench.schema);
    data::save_attack_table((out / "attacks.txt").string(), bench.attacks);
    write_resolved(c, (out / "resolved_config.json").string());

    std::size_t effective = 0;
    for (const auto& a : bench.attacks) effective += a.expected_impact_achieved ? 1 : 0;
    std::printf("train_records %zu\ntest_records %zu\nfeatures %zu\nattacks %zu\n"
                "attacks_expected_effective %zu\nout %s\n",
                bench.train.records(), bench.test.records(), bench.train.features(),
                bench.attacks.size(), effective, out.string().c_str());
    return 0;
}

int cmd_train(cfg::RunConfig c) {
    const std::string data_path = require_path(c.paths.data, "--data", "training CSV");
    const std::string out_path = require_path(c.paths.out, "--out", "model output path");

    data::RawDataset raw = data::load_csv(data_path, data::Schema{});
    data::Schema schema = infer_schema(raw.feature_names);
    FitResult fit = fit_pipeline(c, raw, schema, c.seed, /*verbose=*/true);

    json extras;
    extras["pipeline"] = recipe_to_json(fit.recipe);
    nn::save_model(fit.model, out_path, extras);
    rep::save_train_history_csv(out_path + ".history.csv", fit.history);
    write_resolved(c, out_path + ".config.json");

    const std::size_t best = fit.history.best_epoch;
    std::printf("epochs %zu\nbest_epoch %zu\nval_rmse %.6f\nmodel %s\n",
                fit.history.epochs(), best,
                best ? std::sqrt(fit.history.val_loss[best - 1]) : 0.0,
                out_path.c_str());
    return 0;
}

int cmd_detect(cfg::RunConfig c, bool config_given) {
    const std::string model_path = require_path(c.paths.model, "--model", "model file");
    const std::string data_path = require_path(c.paths.data, "--data", "input CSV");
    const std::string out_path = require_path(c.paths.out, "--out", "report output path");

    json extras;
    nn::Model model = nn::load_model(model_path, &extras);
    PipelineRecipe recipe = recipe_from_json(extras, model_path);
    // An explicit config overrides the detector settings stored with the
    // model; either way the echo records the values actually used.
    if (config_given)
        recipe.detector = c.detector;
    else
        c.detector = recipe.detector;
    c.stage = recipe.stage;

    data::RawDataset raw = data::load_csv(data_path, data::Schema{});
    Scores s = score_dataset(model, recipe, raw);
    std::vector<det::AnomalyInterval> intervals =
        det::detect(s.z, recipe.detector, s.sample_to_record, recipe.model_features);

    rep::DetectionReport report;
    report.stage = recipe.stage;
    report.detector = recipe.detector;
    report.timestamp_base = raw.timestamps.empty() ? 0 : raw.timestamps.front();
    report.records = raw.records();
    report.intervals = intervals;
    report.scores_csv = fs::path(out_path).filename().string() + ".scores.csv";

    rep::RecordScores rs;
    rs.records = s.sample_to_record;
    for (std::size_t rec : s.sample_to_record) rs.timestamps.push_back(raw.timestamps[rec]);
    rs.scores = s.max_z;
    rep::save_record_scores_csv(out_path + ".scores.csv", rs);
    rep::save_detection_report(out_path, report);
    write_resolved(c, out_path + ".config.json");

    std::printf("records %zu\nscored_samples %zu\nintervals %zu\n", raw.records(),
                s.max_z.size(), intervals.size());
    for (const auto& iv : intervals)
        std::printf("interval %lld %lld peak_z %.4f feature %s\n",
                    static_cast<long long>(raw.timestamps[iv.start_index]),
                    static_cast<long long>(raw.timestamps[iv.end_index - 1] + 1),
                    iv.peak_zscore, iv.triggering_feature.c_str());
    return 0;
}

int cmd_eval(cfg::RunConfig c, std::vector<std::string> report_paths) {
    if (report_paths.empty()) report_paths = c.paths.reports;
    if (report_paths.empty())
        throw ConfigError("eval needs at least one detection report "
                          "(positional argument or paths.reports in the config)");
    const std::string data_path =
        require_path(c.paths.data, "--data",
                     c.evaluation.mode == eval::ScoreMode::attack_based
                         ? "attack table"
                         : "labeled CSV");
    c.paths.reports = report_paths;

    std::vector<rep::DetectionReport> reports;
    for (const std::string& p : report_paths)
        reports.push_back(rep::load_detection_report(p));
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (reports[i].records != reports[0].records ||
            reports[i].timestamp_base != reports[0].timestamp_base)
            throw DataError("detection reports cover different timelines: " +
                            report_paths[0] + " vs " + report_paths[i]);

    std::vector<det::AnomalyInterval> fused;
    if (reports.size() == 1) {
        fused = reports[0].intervals;
    } else {
        std::vector<std::vector<det::AnomalyInterval>> parts;
        for (auto& r : reports) parts.push_back(r.intervals);
        fused = eval::ensemble_union(parts);
    }

    rep::EvalReport out;
    out.mode = c.evaluation.mode;
    out.extension_seconds = c.evaluation.extension_seconds;
    out.include_ineffective = c.evaluation.include_ineffective;
    out.report_paths = report_paths;

    if (c.evaluation.mode == eval::ScoreMode::attack_based) {
        std::vector<data::AttackLabel> attacks = data::load_attack_table(data_path);
        std::vector<std::int64_t> ts(reports[0].records);
        for (std::size_t i = 0; i < ts.size(); ++i)
            ts[i] = reports[0].timestamp_base + static_cast<std::int64_t>(i);
        out.metrics = eval::attack_based_score(fused, attacks, ts,
                                               c.evaluation.extension_seconds,
                                               c.evaluation.include_ineffective);
        out.outcomes =
            eval::per_attack_outcomes(fused, attacks, ts, c.evaluation.extension_seconds);
        std::fputs(rep::format_metrics(out.metrics).c_str(), stdout);
        std::fputs(rep::format_attack_table(out.outcomes, attacks).c_str(), stdout);
    } else {
        data::RawDataset labeled = data::load_csv(data_path, data::Schema{});
        if (labeled.labels.empty())
            throw DataError(data_path + ": record mode needs a label column");
        if (labeled.records() != reports[0].records)
            throw DataError("label file covers " + std::to_string(labeled.records()) +
                            " records but the reports cover " +
                            std::to_string(reports[0].records));
        out.metrics = eval::record_based_score(fused, labeled.labels);
        std::fputs(rep::format_metrics(out.metrics).c_str(), stdout);
        if (reports.size() == 1 && !reports[0].scores_csv.empty()) {
            const fs::path scores_path =
                fs::path(report_paths[0]).parent_path() / reports[0].scores_csv;
            std::error_code ec;
            if (fs::exists(scores_path, ec)) {
                rep::RecordScores rs = rep::load_record_scores_csv(scores_path.string());
                std::vector<std::uint8_t> labels;
                for (std::size_t rec : rs.records) labels.push_back(labeled.labels.at(rec));
                out.roc = eval::roc_auc(rs.scores, labels);
                out.has_roc = true;
                std::printf("auc: %.4f\n", out.roc.auc);
            }
        }
    }

    if (!c.paths.out.empty()) {
        rep::save_eval_report(c.paths.out, out);
        write_resolved(c, c.paths.out + ".config.json");
    } else {
        std::fputs(cfg::resolved_config(c).c_str(), stderr);
    }
    return 0;
}

int cmd_grid(cfg::RunConfig c) {
    const fs::path dir = require_path(c.paths.data, "--data", "benchmark directory");
    const std::string out_path = require_path(c.paths.out, "--out", "grid CSV path");

    data::RawDataset train_raw = data::load_csv((dir / "train.csv").string(), data::Schema{});
    data::RawDataset test_raw = data::load_csv((dir / "test.csv").string(), data::Schema{});
    std::vector<data::AttackLabel> attacks =
        data::load_attack_table((dir / "attacks.txt").string());
    data::Schema schema = infer_schema(train_raw.feature_names);

    std::vector<eval::RunScores> runs;
    for (std::size_t r = 0; r < c.grid.runs; ++r) {
        const std::uint64_t seed = c.seed + r;
        std::fprintf(stderr, "run %zu/%zu (seed %llu)\n", r + 1, c.grid.runs,
                     static_cast<unsigned long long>(seed));
        FitResult fit = fit_pipeline(c, train_raw, schema, seed, /*verbose=*/false);
        const std::size_t best = fit.history.best_epoch;
        std::fprintf(stderr, "  %zu epochs, val RMSE %.4f\n", fit.history.epochs(),
                     best ? std::sqrt(fit.history.val_loss[best - 1]) : 0.0);
        Scores s = score_dataset(fit.model, fit.recipe, test_raw);
        runs.push_back({std::move(s.z), std::move(s.sample_to_record)});
    }

    eval::GridSpec spec;
    spec.thresholds = c.grid.thresholds;
    spec.windows = c.grid.windows;
    eval::GridSearchResult gs = eval::grid_search(
        runs, attacks, test_raw.timestamps, c.evaluation.extension_seconds, spec,
        c.grid.jobs, c.evaluation.include_ineffective);

    rep::save_grid_csv(out_path, gs);
    const eval::GridCell& best = gs.chosen();
    json chosen = {{"threshold", best.threshold},
                   {"window", best.window},
                   {"f1", best.metrics.f1},
                   {"precision", best.metrics.precision},
                   {"recall", best.metrics.recall},
                   {"runs", gs.runs_averaged}};
    std::ofstream cj(out_path + ".chosen.json", std::ios::binary);
    if (!cj) throw IoError("cannot write " + out_path + ".chosen.json");
    cj << chosen.dump(2) << "\n";
    write_resolved(c, out_path + ".config.json");

    std::printf("chosen_threshold %g\nchosen_window %zu\nmean_f1 %.4f\nruns %zu\n",
                best.threshold, best.window, best.metrics.f1, gs.runs_averaged);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"1D-CNN anomaly detection for industrial process time series"};
    app.require_subcommand(1);

    std::string config_path, data_path, model_path, out_path, stage, mode;
    double extension = 0.0;
    std::size_t jobs = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> report_paths;

    auto add_common = [&](CLI::App* cmd, bool with_seed) {
        cmd->add_option("--config", config_path, "run configuration JSON");
        cmd->add_option("--out", out_path, "output path");
        if (with_seed) cmd->add_option("--seed", seed, "random seed");
        return cmd;
    };

    CLI::App* sim = add_common(app.add_subcommand(
        "simulate", "generate the benchmark dataset suite into --out"), true);

    CLI::App* train = add_common(app.add_subcommand(
        "train", "train a predictor on an attack-free CSV"), true);
    train->add_option("--data", data_path, "training CSV");
    train->add_option("--stage", stage, "train on this stage's features only");

    CLI::App* detect = add_common(app.add_subcommand(
        "detect", "score a CSV with a trained model and report anomaly intervals"),
        false);
    detect->add_option("--data", data_path, "input CSV");
    detect->add_option("--model", model_path, "model file from `train`");

    CLI::App* evalc = add_common(app.add_subcommand(
        "eval", "score detection reports against an attack table or labels"), false);
    evalc->add_option("reports", report_paths, "detection report JSON files");
    evalc->add_option("--data", data_path, "attack table (attack mode) or labeled CSV");
    evalc->add_option("--mode", mode, "attack | record")
        ->check(CLI::IsMember({"attack", "record"}));
    evalc->add_option("--extension", extension,
                      "seconds an attack's effect may outlast it");

    CLI::App* grid = add_common(app.add_subcommand(
        "grid", "grid-search detector settings over a benchmark directory"), true);
    grid->add_option("--data", data_path, "directory from `simulate`");
    grid->add_option("--jobs", jobs, "worker threads for scoring grid cells");
    grid->add_option("--extension", extension,
                     "seconds an attack's effect may outlast it");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }

    try {
        cfg::RunConfig c;
        const bool config_given = !config_path.empty();
        if (config_given) c = cfg::load_run_config(config_path);

        // command-line flags override the config file
        auto used = [&](CLI::App* cmd, const char* name) {
            return cmd->count(name) > 0;
        };
        CLI::App* active = app.get_subcommands().front();
        if (used(active, "--out")) c.paths.out = out_path;
        if (active->get_option_no_throw("--data") && used(active, "--data"))
            c.paths.data = data_path;
        if (active->get_option_no_throw("--model") && used(active, "--model"))
            c.paths.model = model_path;
        if (active->get_option_no_throw("--seed") && used(active, "--seed"))
            c.seed = seed;
        if (active->get_option_no_throw("--stage") && used(active, "--stage"))
            c.stage = stage;
        if (active->get_option_no_throw("--mode") && used(active, "--mode"))
            c.evaluation.mode = cfg::mode_from_name(mode);
        if (active->get_option_no_throw("--extension") && used(active, "--extension"))
            c.evaluation.extension_seconds = extension;
        if (active->get_option_no_throw("--jobs") && used(active, "--jobs"))
            c.grid.jobs = jobs;

        if (active == sim) return cmd_simulate(std::move(c));
        if (active == train) return cmd_train(std::move(c));
        if (active == detect) return cmd_detect(std::move(c), config_given);
        if (active == evalc) return cmd_eval(std::move(c), report_paths);
        if (active == grid) return cmd_grid(std::move(c));
        throw ConfigError("unknown command");
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
