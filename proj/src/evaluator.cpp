#include "icsad/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "icsad/errors.hpp"

namespace icsad::eval {

namespace {

void check_detections(const std::vector<det::AnomalyInterval>& detections, std::size_t records) {
    for (const auto& d : detections)
        if (d.end_index > records)
            throw DimensionError("detection interval [" + std::to_string(d.start_index) + ", " +
                                 std::to_string(d.end_index) + ") exceeds the " +
                                 std::to_string(records) + " labeled records");
}

// A detection covers the instants ts[start..end-1]; the extended attack spans
// [attack.start, attack.end + extension).
bool intersects(const det::AnomalyInterval& d, const data::AttackLabel& a,
                const std::vector<std::int64_t>& ts, double extension) {
    const double det_first = static_cast<double>(ts[d.start_index]);
    const double det_last = static_cast<double>(ts[d.end_index - 1]);
    return det_last >= static_cast<double>(a.start) &&
           det_first < static_cast<double>(a.end) + extension;
}

}  // namespace

double f1(double precision, double recall) {
    if (precision <= 0.0 && recall <= 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

MetricSet attack_based_score(const std::vector<det::AnomalyInterval>& detections,
                             const std::vector<data::AttackLabel>& attacks,
                             const std::vector<std::int64_t>& record_timestamps,
                             double extension_seconds, bool include_ineffective) {
    if (attacks.empty())
        throw ConfigError("attack-based scoring needs a non-empty attack table");
    if (extension_seconds < 0.0)
        throw ConfigError("attack extension must be non-negative, got " +
                          std::to_string(extension_seconds));
    check_detections(detections, record_timestamps.size());

    std::vector<const data::AttackLabel*> included, excused;
    for (const auto& a : attacks)
        (include_ineffective || a.expected_impact_achieved ? included : excused).push_back(&a);
    if (included.empty())
        throw ConfigError("every attack in the table is marked ineffective; nothing to score");

    std::size_t detected = 0;
    for (const auto* a : included) {
        bool hit = false;
        for (const auto& d : detections)
            if (intersects(d, *a, record_timestamps, extension_seconds)) {
                hit = true;
                break;
            }
        detected += hit ? 1 : 0;
    }

    std::size_t tp_intervals = 0, fp_intervals = 0;
    for (const auto& d : detections) {
        bool hits_included = false, hits_excused = false;
        for (const auto* a : included)
            if (intersects(d, *a, record_timestamps, extension_seconds)) {
                hits_included = true;
                break;
            }
        if (!hits_included)
            for (const auto* a : excused)
                if (intersects(d, *a, record_timestamps, extension_seconds)) {
                    hits_excused = true;
                    break;
                }
        if (hits_included)
            ++tp_intervals;
        else if (!hits_excused)
            ++fp_intervals;
    }

    MetricSet m;
    m.mode = ScoreMode::attack_based;
    m.true_positives = detected;
    m.false_negatives = included.size() - detected;
    m.false_positives = fp_intervals;
    m.detecting_intervals = tp_intervals;
    m.recall = static_cast<double>(detected) / static_cast<double>(included.size());
    if (tp_intervals + fp_intervals == 0) {
        m.precision = 0.0;
        m.degenerate_precision = true;
    } else {
        m.precision =
            static_cast<double>(tp_intervals) / static_cast<double>(tp_intervals + fp_intervals);
    }
    m.f1 = f1(m.precision, m.recall);
    return m;
}

std::vector<AttackOutcome> per_attack_outcomes(const std::vector<det::AnomalyInterval>& detections,
                                               const std::vector<data::AttackLabel>& attacks,
                                               const std::vector<std::int64_t>& record_timestamps,
                                               double extension_seconds) {
    check_detections(detections, record_timestamps.size());
    std::vector<AttackOutcome> out;
    out.reserve(attacks.size());
    for (const auto& a : attacks) {
        AttackOutcome row;
        row.attack_id = a.attack_id;
        double first = std::numeric_limits<double>::infinity();
        for (const auto& d : detections)
            if (intersects(d, a, record_timestamps, extension_seconds)) {
                row.detected = true;
                first = std::min(first,
                                 static_cast<double>(record_timestamps[d.start_index]));
            }
        if (row.detected)
            row.latency_seconds = std::max(0.0, first - static_cast<double>(a.start));
        out.push_back(row);
    }
    return out;
}

MetricSet record_based_score(const std::vector<det::AnomalyInterval>& detections,
                             const std::vector<std::uint8_t>& per_record_labels) {
    check_detections(detections, per_record_labels.size());
    std::vector<std::uint8_t> flag(per_record_labels.size(), 0);
    for (const auto& d : detections)
        for (std::size_t i = d.start_index; i < d.end_index; ++i) flag[i] = 1;

    MetricSet m;
    m.mode = ScoreMode::record_based;
    for (std::size_t i = 0; i < per_record_labels.size(); ++i) {
        const bool y = per_record_labels[i] != 0, p = flag[i] != 0;
        if (p && y) ++m.true_positives;
        if (p && !y) ++m.false_positives;
        if (!p && y) ++m.false_negatives;
    }
    const std::size_t flagged = m.true_positives + m.false_positives;
    const std::size_t positives = m.true_positives + m.false_negatives;
    if (flagged == 0) {
        m.precision = 0.0;
        m.degenerate_precision = true;
    } else {
        m.precision = static_cast<double>(m.true_positives) / static_cast<double>(flagged);
    }
    m.recall = positives == 0
                   ? 0.0
                   : static_cast<double>(m.true_positives) / static_cast<double>(positives);
    m.f1 = f1(m.precision, m.recall);
    return m;
}

RocResult roc_auc(const std::vector<double>& record_scores,
                  const std::vector<std::uint8_t>& per_record_labels) {
    if (record_scores.size() != per_record_labels.size())
        throw DimensionError("ROC needs one score per label: " +
                             std::to_string(record_scores.size()) + " scores vs " +
                             std::to_string(per_record_labels.size()) + " labels");
    std::size_t positives = 0;
    for (auto v : per_record_labels) positives += v ? 1 : 0;
    const std::size_t negatives = per_record_labels.size() - positives;
    if (positives == 0 || negatives == 0)
        throw DataError("ROC is undefined without both attack and normal records");

    std::vector<std::size_t> order(record_scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return record_scores[a] > record_scores[b];
    });

    RocResult r;
    r.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    double prev_fpr = 0.0, prev_tpr = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = record_scores[order[i]];
        // consume the whole tie group before emitting a point; this makes the
        // trapezoid rule equal to the rank statistic with ties at one half
        while (i < order.size() && record_scores[order[i]] == s) {
            if (per_record_labels[order[i]])
                ++tp;
            else
                ++fp;
            ++i;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(positives);
        const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        r.auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        r.points.push_back({fpr, tpr, s});
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    return r;
}

std::vector<det::AnomalyInterval> ensemble_union(
    const std::vector<std::vector<det::AnomalyInterval>>& per_stage) {
    std::vector<det::AnomalyInterval> all;
    for (const auto& stage : per_stage) all.insert(all.end(), stage.begin(), stage.end());
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.start_index != b.start_index ? a.start_index < b.start_index
                                              : a.end_index < b.end_index;
    });
    std::vector<det::AnomalyInterval> out;
    for (const auto& d : all) {
        if (!out.empty() && d.start_index <= out.back().end_index) {
            auto& cur = out.back();
            cur.end_index = std::max(cur.end_index, d.end_index);
            if (d.peak_zscore > cur.peak_zscore) {
                cur.peak_zscore = d.peak_zscore;
                cur.triggering_feature = d.triggering_feature;
            }
        } else {
            out.push_back(d);
        }
    }
    return out;
}

GridSearchResult grid_search(const std::vector<RunScores>& runs,
                             const std::vector<data::AttackLabel>& attacks,
                             const std::vector<std::int64_t>& record_timestamps,
                             double extension_seconds, const GridSpec& grid, std::size_t jobs,
                             bool include_ineffective) {
    if (runs.empty()) throw ConfigError("grid search needs at least one scored run");
    if (grid.thresholds.empty() || grid.windows.empty())
        throw ConfigError("grid search needs non-empty threshold and window ranges");
    std::size_t min_samples = std::numeric_limits<std::size_t>::max();
    for (const auto& r : runs) {
        if (r.zscores.rank() != 2)
            throw DimensionError("run z-scores must be [samples, features], got rank " +
                                 std::to_string(r.zscores.rank()));
        if (!r.sample_to_record.empty() && r.sample_to_record.size() != r.zscores.dim(0))
            throw DimensionError("run sample map covers " +
                                 std::to_string(r.sample_to_record.size()) +
                                 " samples, scores have " + std::to_string(r.zscores.dim(0)));
        min_samples = std::min(min_samples, r.zscores.dim(0));
    }
    const std::size_t max_window = *std::max_element(grid.windows.begin(), grid.windows.end());
    if (max_window > min_samples)
        throw ConfigError("grid window of " + std::to_string(max_window) +
                          " samples exceeds the shortest run of " +
                          std::to_string(min_samples));

    GridSearchResult result;
    result.threshold_count = grid.thresholds.size();
    result.window_count = grid.windows.size();
    result.runs_averaged = runs.size();
    result.cells.resize(grid.thresholds.size() * grid.windows.size());

    auto score_cell = [&](std::size_t idx) {
        GridCell& cell = result.cells[idx];
        cell.threshold = grid.thresholds[idx / grid.windows.size()];
        cell.window = grid.windows[idx % grid.windows.size()];

        det::DetectorConfig cfg;
        cfg.threshold = cell.threshold;
        cfg.window = cell.window;

        MetricSet& m = cell.metrics;
        m.mode = ScoreMode::attack_based;
        bool any_flagged = false;
        for (const auto& r : runs) {
            auto dets = det::detect(r.zscores, cfg, r.sample_to_record);
            MetricSet one = attack_based_score(dets, attacks, record_timestamps,
                                               extension_seconds, include_ineffective);
            m.precision += one.precision;
            m.recall += one.recall;
            m.f1 += one.f1;
            m.true_positives += one.true_positives;
            m.false_positives += one.false_positives;
            m.false_negatives += one.false_negatives;
            m.detecting_intervals += one.detecting_intervals;
            any_flagged = any_flagged || !one.degenerate_precision;
        }
        const double k = static_cast<double>(runs.size());
        m.precision /= k;
        m.recall /= k;
        m.f1 /= k;
        m.degenerate_precision = !any_flagged;
    };

    const std::size_t cells = result.cells.size();
    jobs = std::max<std::size_t>(1, std::min(jobs, cells));
    if (jobs == 1) {
        for (std::size_t i = 0; i < cells; ++i) score_cell(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < jobs; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < cells; i = next.fetch_add(1)) {
                    try {
                        score_cell(i);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        return;
                    }
                }
            });
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }

    for (std::size_t i = 1; i < cells; ++i) {
        const GridCell &c = result.cells[i], &b = result.cells[result.best_cell];
        const bool better = c.metrics.f1 > b.metrics.f1 ||
                            (c.metrics.f1 == b.metrics.f1 && c.threshold > b.threshold) ||
                            (c.metrics.f1 == b.metrics.f1 && c.threshold == b.threshold &&
                             c.window > b.window);
        if (better) result.best_cell = i;
    }
    return result;
}

}  // namespace icsad::eval
