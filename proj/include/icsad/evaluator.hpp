#pragma once

// Scores detection intervals against labeled attacks. Two modes: attack-based
// (did each attack get caught; false alarms counted per merged interval) and
// record-based (per-second flag comparison). Also ROC/AUC over per-record
// scores, multi-stage ensemble union, and a T x W grid search.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "icsad/data.hpp"
#include "icsad/detector.hpp"
#include "icsad/tensor.hpp"

namespace icsad::eval {

enum class ScoreMode { attack_based, record_based };

// Count semantics depend on the mode. Attack-based: true_positives/
// false_negatives count attacks caught/missed, false_positives counts merged
// detection intervals touching no extended attack, and detecting_intervals
// counts those touching at least one (precision is computed over intervals).
// Record-based: plain per-record confusion counts.
struct MetricSet {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    std::size_t detecting_intervals = 0;
    ScoreMode mode = ScoreMode::attack_based;
    bool degenerate_precision = false;  // nothing was flagged; precision reported as 0
};

struct AttackOutcome {
    int attack_id = 0;
    bool detected = false;
    double latency_seconds = 0.0;  // first intersecting detection start minus
                                   // attack start; 0 when the detection predates it
};

// Harmonic mean of precision and recall; 0 when both are 0.
double f1(double precision, double recall);

// An attack counts as detected iff any detection interval intersects
// [attack.start, attack.end + extension). Detection intervals hold record
// indices; record_timestamps converts them to time spans. When
// include_ineffective is false, attacks whose expected impact never
// materialized are dropped from recall, and intervals touching only those
// attacks are excused rather than counted as false alarms.
MetricSet attack_based_score(const std::vector<det::AnomalyInterval>& detections,
                             const std::vector<data::AttackLabel>& attacks,
                             const std::vector<std::int64_t>& record_timestamps,
                             double extension_seconds,
                             bool include_ineffective = true);

// Per-attack detection flags and first-detection latencies for reporting;
// same intersection rule as attack_based_score.
std::vector<AttackOutcome> per_attack_outcomes(const std::vector<det::AnomalyInterval>& detections,
                                               const std::vector<data::AttackLabel>& attacks,
                                               const std::vector<std::int64_t>& record_timestamps,
                                               double extension_seconds);

// Expands detections to a per-record flag vector and compares against the
// 0/1 labels; detection indices must stay within the label vector.
MetricSet record_based_score(const std::vector<det::AnomalyInterval>& detections,
                             const std::vector<std::uint8_t>& per_record_labels);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points;  // (0,0) .. (1,1), one step per distinct score
    double auc = 0.0;              // trapezoid rule; equals the pairwise rank
                                   // statistic with ties scored 0.5
};

// ROC over per-record anomaly scores (the max-feature z-score) against 0/1
// labels; needs at least one positive and one negative record.
RocResult roc_auc(const std::vector<double>& record_scores,
                  const std::vector<std::uint8_t>& per_record_labels);

// Union of per-stage detections, merged where overlapping or adjacent; peak
// score and triggering feature carry over from the strongest member.
std::vector<det::AnomalyInterval> ensemble_union(
    const std::vector<std::vector<det::AnomalyInterval>>& per_stage);

// Default grid: the T range 1.8..3.0 in steps of 0.2 and the W range
// 50..300 s in steps of 50.
struct GridSpec {
    std::vector<double> thresholds{1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0};
    std::vector<std::size_t> windows{50, 100, 150, 200, 250, 300};
};

// One trained model's scored test pass: z-scores plus the sample-to-record
// map that positions them on the test timeline.
struct RunScores {
    Tensor zscores;
    std::vector<std::size_t> sample_to_record;
};

struct GridCell {
    double threshold = 0.0;
    std::size_t window = 0;
    MetricSet metrics;  // averaged rates, summed counts when runs > 1
};

struct GridSearchResult {
    std::vector<GridCell> cells;  // threshold-major: cells[t * windows + w]
    std::size_t threshold_count = 0;
    std::size_t window_count = 0;
    std::size_t best_cell = 0;  // max mean F1; ties -> largest T, then largest W
    std::size_t runs_averaged = 1;
    const GridCell& chosen() const { return cells[best_cell]; }
};

// Evaluates detect() + attack_based_score for every (T, W) cell, averaging
// F1 across the supplied runs. Cells are scored in parallel across `jobs`
// threads; the scoring itself is pure. include_ineffective is forwarded to
// attack_based_score for every cell.
GridSearchResult grid_search(const std::vector<RunScores>& runs,
                             const std::vector<data::AttackLabel>& attacks,
                             const std::vector<std::int64_t>& record_timestamps,
                             double extension_seconds, const GridSpec& grid = {},
                             std::size_t jobs = 1, bool include_ineffective = true);

}  // namespace icsad::eval
