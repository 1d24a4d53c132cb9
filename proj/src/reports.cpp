#include "icsad/reports.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "icsad/errors.hpp"

namespace icsad::rep {
namespace {

using nlohmann::json;

// Shortest representation that parses back to the same double, so files are
// byte-stable and lossless at the same time.
std::string num(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json parse_json(const std::string& path) {
    try {
        return json::parse(slurp(path));
    } catch (const json::exception& e) {
        throw DataError(path + ": not valid JSON: " + e.what());
    }
}

double csv_double(const std::string& field, const std::string& path) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || p != field.data() + field.size())
        throw DataError(path + ": bad numeric field \"" + field + "\"");
    return v;
}

}  // namespace

void save_detection_report(const std::string& path, const DetectionReport& report) {
    json intervals = json::array();
    for (const auto& iv : report.intervals)
        intervals.push_back({{"start_record", iv.start_index},
                             {"end_record", iv.end_index},
                             {"start_timestamp",
                              report.timestamp_base + static_cast<std::int64_t>(iv.start_index)},
                             {"end_timestamp",
                              report.timestamp_base + static_cast<std::int64_t>(iv.end_index)},
                             {"peak_zscore", iv.peak_zscore},
                             {"triggering_feature", iv.triggering_feature}});
    json j = {
        {"stage", report.stage},
        {"detector",
         {{"threshold", report.detector.threshold},
          {"window", report.detector.window},
          {"sigma_floor", report.detector.sigma_floor}}},
        // An interval begins at the FIRST of the `window` consecutive
        // suspicious samples, i.e. reports are backdated to onset.
        {"window_rule", "interval starts at the first of `window` consecutive samples with z-score > threshold"},
        {"timestamp_base", report.timestamp_base},
        {"records", report.records},
        {"intervals", intervals},
        {"scores_csv", report.scores_csv},
    };
    open_out(path) << j.dump(2) << "\n";
}

DetectionReport load_detection_report(const std::string& path) {
    json j = parse_json(path);
    DetectionReport r;
    try {
        r.stage = j.at("stage").get<std::string>();
        r.detector.threshold = j.at("detector").at("threshold").get<double>();
        r.detector.window = j.at("detector").at("window").get<std::size_t>();
        r.detector.sigma_floor = j.at("detector").at("sigma_floor").get<double>();
        r.timestamp_base = j.at("timestamp_base").get<std::int64_t>();
        r.records = j.at("records").get<std::size_t>();
        r.scores_csv = j.at("scores_csv").get<std::string>();
        for (const auto& iv : j.at("intervals")) {
            det::AnomalyInterval d;
            d.start_index = iv.at("start_record").get<std::size_t>();
            d.end_index = iv.at("end_record").get<std::size_t>();
            d.peak_zscore = iv.at("peak_zscore").get<double>();
            d.triggering_feature = iv.at("triggering_feature").get<std::string>();
            if (d.end_index <= d.start_index || d.end_index > r.records)
                throw DataError(path + ": interval out of range");
            r.intervals.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw DataError(path + ": not a detection report: " + e.what());
    }
    return r;
}

void save_record_scores_csv(const std::string& path, const RecordScores& scores) {
    if (scores.records.size() != scores.scores.size() ||
        scores.records.size() != scores.timestamps.size())
        throw DimensionError("record scores: column lengths differ");
    std::ofstream out = open_out(path);
    out << "record,timestamp,max_zscore\n";
    for (std::size_t i = 0; i < scores.records.size(); ++i)
        out << scores.records[i] << "," << scores.timestamps[i] << ","
            << num(scores.scores[i]) << "\n";
}

RecordScores load_record_scores_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "record,timestamp,max_zscore")
        throw DataError(path + ": expected header record,timestamp,max_zscore");
    RecordScores rs;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string rec, ts, score;
        if (!std::getline(row, rec, ',') || !std::getline(row, ts, ',') ||
            !std::getline(row, score))
            throw DataError(path + ": malformed row \"" + line + "\"");
        rs.records.push_back(static_cast<std::size_t>(csv_double(rec, path)));
        rs.timestamps.push_back(static_cast<std::int64_t>(csv_double(ts, path)));
        rs.scores.push_back(csv_double(score, path));
    }
    return rs;
}

void save_train_history_csv(const std::string& path, const nn::TrainHistory& history) {
    std::ofstream out = open_out(path);
    out << "epoch,train_loss,val_loss,seconds\n";
    for (std::size_t e = 0; e < history.epochs(); ++e)
        out << (e + 1) << "," << num(history.train_loss[e]) << ","
            << num(history.val_loss[e]) << "," << num(history.seconds[e]) << "\n";
}

void save_eval_report(const std::string& path, const EvalReport& report) {
    const auto& m = report.metrics;
    json j = {
        {"mode", m.mode == eval::ScoreMode::attack_based ? "attack" : "record"},
        {"extension_seconds", report.extension_seconds},
        {"include_ineffective", report.include_ineffective},
        {"reports", report.report_paths},
        {"metrics",
         {{"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"true_positives", m.true_positives},
          {"false_positives", m.false_positives},
          {"false_negatives", m.false_negatives},
          {"detecting_intervals", m.detecting_intervals},
          {"degenerate_precision", m.degenerate_precision}}},
    };
    if (!report.outcomes.empty()) {
        json rows = json::array();
        for (const auto& o : report.outcomes)
            rows.push_back({{"attack_id", o.attack_id},
                            {"detected", o.detected},
                            {"latency_seconds", o.latency_seconds}});
        j["attacks"] = rows;
    }
    if (report.has_roc) {
        json pts = json::array();
        for (const auto& p : report.roc.points)
            pts.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", p.threshold}});
        j["roc"] = {{"auc", report.roc.auc}, {"points", pts}};
    }
    open_out(path) << j.dump(2) << "\n";
}

void save_grid_csv(const std::string& path, const eval::GridSearchResult& grid) {
    std::ofstream out = open_out(path);
    out << "threshold,window,f1,precision,recall,true_positives,false_positives,"
           "false_negatives\n";
    for (const auto& c : grid.cells)
        out << num(c.threshold) << "," << c.window << "," << num(c.metrics.f1) << ","
            << num(c.metrics.precision) << "," << num(c.metrics.recall) << ","
            << c.metrics.true_positives << "," << c.metrics.false_positives << ","
            << c.metrics.false_negatives << "\n";
}

std::string format_metrics(const eval::MetricSet& m) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "mode: %s\nprecision: %.4f\nrecall: %.4f\nf1: %.4f\n"
                  "true_positives: %zu\nfalse_positives: %zu\nfalse_negatives: %zu\n",
                  m.mode == eval::ScoreMode::attack_based ? "attack" : "record",
                  m.precision, m.recall, m.f1, m.true_positives, m.false_positives,
                  m.false_negatives);
    std::string s(buf);
    if (m.mode == eval::ScoreMode::attack_based) {
        std::snprintf(buf, sizeof buf, "detecting_intervals: %zu\n",
                      m.detecting_intervals);
        s += buf;
    }
    if (m.degenerate_precision) s += "note: nothing was flagged; precision reported as 0\n";
    return s;
}

std::string format_attack_table(const std::vector<eval::AttackOutcome>& outcomes,
                                const std::vector<data::AttackLabel>& attacks) {
    std::string s = "attack  detected  latency_s  effective  description\n";
    char buf[128];
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        const data::AttackLabel* a =
            i < attacks.size() && attacks[i].attack_id == o.attack_id ? &attacks[i]
                                                                      : nullptr;
        std::snprintf(buf, sizeof buf, "%6d  %8s  %9.1f  %9s  ", o.attack_id,
                      o.detected ? "yes" : "no", o.latency_seconds,
                      a && !a->expected_impact_achieved ? "no" : "yes");
        s += buf;
        if (a) s += a->description;
        s += "\n";
    }
    return s;
}

}  // namespace icsad::rep
