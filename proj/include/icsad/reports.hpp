#pragma once

// File formats for everything the pipeline hands to a later step or to a
// plotting tool: detection reports (JSON), per-record anomaly-score CSVs,
// training-history CSVs, evaluation reports (JSON) and grid-search CSVs.
// All writers are deterministic: the same values always produce the same
// bytes, and doubles round-trip exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "icsad/detector.hpp"
#include "icsad/evaluator.hpp"
#include "icsad/nn.hpp"

namespace icsad::rep {

// One detector pass over one dataset. Record timestamps are reconstructed
// as timestamp_base + index (the loaders enforce a strict 1 Hz cadence), so
// evaluation can score intervals without rereading the dataset.
struct DetectionReport {
    std::string stage;  // feature subset the model was trained on; "" = all
    det::DetectorConfig detector;
    std::int64_t timestamp_base = 0;
    std::size_t records = 0;
    std::vector<det::AnomalyInterval> intervals;
    std::string scores_csv;  // sibling per-record score CSV, relative to the report
};

void save_detection_report(const std::string& path, const DetectionReport& report);
DetectionReport load_detection_report(const std::string& path);

// Per-record anomaly scores (max z-score across features), one row per
// scored window target: record,timestamp,max_zscore.
struct RecordScores {
    std::vector<std::size_t> records;
    std::vector<std::int64_t> timestamps;
    std::vector<double> scores;
};

void save_record_scores_csv(const std::string& path, const RecordScores& scores);
RecordScores load_record_scores_csv(const std::string& path);

// epoch,train_loss,val_loss — one row per epoch that ran. Wall-clock epoch
// timings stay on the progress stream: file outputs must be byte-identical
// across reruns of the same seed, and timings never are.
void save_train_history_csv(const std::string& path, const nn::TrainHistory& history);

struct EvalReport {
    eval::ScoreMode mode = eval::ScoreMode::attack_based;
    double extension_seconds = 0.0;
    bool include_ineffective = false;
    std::vector<std::string> report_paths;  // detection reports consumed
    eval::MetricSet metrics;
    std::vector<eval::AttackOutcome> outcomes;  // attack mode
    eval::RocResult roc;                        // record mode, when scores exist
    bool has_roc = false;
};

void save_eval_report(const std::string& path, const EvalReport& report);

// threshold,window,f1,precision,recall,true_positives,false_positives,
// false_negatives — threshold-major, one row per cell.
void save_grid_csv(const std::string& path, const eval::GridSearchResult& grid);

// Human-readable blocks for the command-line output.
std::string format_metrics(const eval::MetricSet& m);
std::string format_attack_table(const std::vector<eval::AttackOutcome>& outcomes,
                                const std::vector<data::AttackLabel>& attacks);

}  // namespace icsad::rep
