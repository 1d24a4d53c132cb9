#include "icsad/data.hpp"

#include <algorithm>
#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "icsad/errors.hpp"

namespace icsad::data {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(trim(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    cells.push_back(trim(cur));
    return cells;
}

// integer seconds, or SWaT-style "22/12/2015 4:30:00 PM"
std::int64_t parse_timestamp(const std::string& cell, std::size_t row) {
    if (cell.empty())
        throw DataError("row " + std::to_string(row) + ": empty timestamp");
    char* end = nullptr;
    const long long direct = std::strtoll(cell.c_str(), &end, 10);
    if (end && *end == '\0') return static_cast<std::int64_t>(direct);

    int d = 0, mo = 0, y = 0, hh = 0, mi = 0, ss = 0;
    char ap[3] = {0};
    const int got =
        std::sscanf(cell.c_str(), "%d/%d/%d %d:%d:%d %2[APMapm]", &d, &mo, &y, &hh, &mi,
                    &ss, ap);
    if (got < 6)
        throw DataError("row " + std::to_string(row) + ": unparseable timestamp '" +
                        cell + "'");
    if (got == 7) {
        const bool pm = ap[0] == 'P' || ap[0] == 'p';
        if (hh == 12) hh = pm ? 12 : 0;
        else if (pm) hh += 12;
    }
    std::tm tm{};
    tm.tm_mday = d;
    tm.tm_mon = mo - 1;
    tm.tm_year = y - 1900;
    tm.tm_hour = hh;
    tm.tm_min = mi;
    tm.tm_sec = ss;
    return static_cast<std::int64_t>(timegm(&tm));
}

double parse_number(const std::string& cell, std::size_t row, const std::string& col) {
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || !end || *end != '\0')
        throw DataError("row " + std::to_string(row) + " column '" + col +
                        "': non-numeric value '" + cell + "'");
    return v;
}

std::uint8_t parse_label(std::string cell, std::size_t row) {
    cell.erase(std::remove(cell.begin(), cell.end(), ' '), cell.end());
    std::transform(cell.begin(), cell.end(), cell.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (cell == "normal") return 0;
    if (cell == "attack") return 1;  // covers the dataset's stray-space "A ttack"
    throw DataError("row " + std::to_string(row) + ": unknown label '" + cell + "'");
}

}  // namespace

std::string Schema::stage_of(const std::string& feature) const {
    for (const auto& [name, stage] : stages)
        if (name == feature) return stage;
    return {};
}

RawDataset load_csv(const std::string& path, const Schema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file, header required");
    const std::vector<std::string> header = split_row(line);

    std::size_t ts_col = header.size();
    std::size_t label_col = header.size();
    std::vector<std::size_t> feature_cols;
    RawDataset out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == schema.timestamp_column) {
            ts_col = i;
        } else if (header[i] == schema.label_column) {
            label_col = i;
        } else {
            feature_cols.push_back(i);
            out.feature_names.push_back(header[i]);
        }
    }
    if (ts_col == header.size())
        throw DataError(path + ": missing timestamp column '" + schema.timestamp_column +
                        "'");
    for (const auto& [name, stage] : schema.stages)
        if (std::find(out.feature_names.begin(), out.feature_names.end(), name) ==
            out.feature_names.end())
            throw DataError(path + ": schema feature column '" + name +
                            "' (stage " + stage + ") not found in header");
    if (out.feature_names.empty()) throw DataError(path + ": no feature columns");

    std::vector<double> flat;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_row(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row) + ": has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        const std::int64_t ts = parse_timestamp(cells[ts_col], row);
        if (!out.timestamps.empty()) {
            const std::int64_t prev = out.timestamps.back();
            if (ts <= prev)
                throw DataError("row " + std::to_string(row) +
                                ": non-monotone timestamp " + std::to_string(ts));
            if (ts != prev + 1)
                throw DataError("row " + std::to_string(row) + ": cadence gap (" +
                                std::to_string(ts - prev) + " s); 1 Hz required");
        }
        out.timestamps.push_back(ts);
        for (std::size_t c : feature_cols)
            flat.push_back(parse_number(cells[c], row, header[c]));
        if (label_col != header.size()) out.labels.push_back(parse_label(cells[label_col], row));
        ++row;
    }
    if (out.timestamps.empty()) throw DataError(path + ": no data rows");
    out.values = Tensor({out.timestamps.size(), out.feature_names.size()}, std::move(flat));
    return out;
}

void save_csv(const std::string& path, const RawDataset& data, const Schema& schema) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot write data file: " + path);
    std::fprintf(f, "%s", schema.timestamp_column.c_str());
    for (const auto& name : data.feature_names) std::fprintf(f, ",%s", name.c_str());
    if (!data.labels.empty()) std::fprintf(f, ",%s", schema.label_column.c_str());
    std::fprintf(f, "\n");
    for (std::size_t r = 0; r < data.records(); ++r) {
        std::fprintf(f, "%" PRId64, data.timestamps[r]);
        for (std::size_t c = 0; c < data.features(); ++c)
            std::fprintf(f, ",%.17g", data.values.at(r, c));
        if (!data.labels.empty())
            std::fprintf(f, ",%s", data.labels[r] ? "Attack" : "Normal");
        std::fprintf(f, "\n");
    }
    if (std::fclose(f) != 0) throw IoError("failed writing data file: " + path);
}

std::vector<AttackLabel> load_attack_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open attack table: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("attack table " + path + ": " + e.what());
    }
    if (!j.is_array()) throw DataError("attack table " + path + ": expected a JSON array");
    std::vector<AttackLabel> table;
    for (const auto& row : j) {
        AttackLabel a;
        a.attack_id = row.at("attack_id").get<int>();
        a.start = row.at("start").get<std::int64_t>();
        a.end = row.at("end").get<std::int64_t>();
        if (a.start >= a.end)
            throw DataError("attack " + std::to_string(a.attack_id) +
                            ": start must precede end");
        if (row.contains("stage_tags"))
            a.stage_tags = row["stage_tags"].get<std::vector<std::string>>();
        if (row.contains("description")) a.description = row["description"].get<std::string>();
        if (row.contains("expected_impact_achieved"))
            a.expected_impact_achieved = row["expected_impact_achieved"].get<bool>();
        table.push_back(std::move(a));
    }
    return table;
}

void save_attack_table(const std::string& path, const std::vector<AttackLabel>& table) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& a : table)
        j.push_back({{"attack_id", a.attack_id},
                     {"start", a.start},
                     {"end", a.end},
                     {"stage_tags", a.stage_tags},
                     {"description", a.description},
                     {"expected_impact_achieved", a.expected_impact_achieved}});
    std::ofstream out(path);
    if (!out) throw IoError("cannot write attack table: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("failed writing attack table: " + path);
}

RawDataset trim_warmup(const RawDataset& data, std::size_t count) {
    if (count == 0) return data;
    if (count >= data.records())
        throw DataError("trim_warmup: dropping " + std::to_string(count) + " of " +
                        std::to_string(data.records()) + " records leaves nothing");
    RawDataset out;
    out.feature_names = data.feature_names;
    out.attack_table = data.attack_table;
    const std::size_t R = data.records() - count, F = data.features();
    out.timestamps.assign(data.timestamps.begin() + static_cast<long>(count),
                          data.timestamps.end());
    out.values = Tensor({R, F});
    std::copy_n(data.values.data() + count * F, R * F, out.values.data());
    if (!data.labels.empty())
        out.labels.assign(data.labels.begin() + static_cast<long>(count),
                          data.labels.end());
    return out;
}

RawDataset select_stage(const RawDataset& data, const Schema& schema,
                        const std::string& stage) {
    std::vector<std::size_t> keep;
    for (std::size_t c = 0; c < data.features(); ++c)
        if (schema.stage_of(data.feature_names[c]) == stage) keep.push_back(c);
    if (keep.empty())
        throw ConfigError("stage '" + stage + "' matches no features in the schema");
    RawDataset out;
    out.timestamps = data.timestamps;
    out.labels = data.labels;
    out.attack_table = data.attack_table;
    for (std::size_t c : keep) out.feature_names.push_back(data.feature_names[c]);
    out.values = Tensor({data.records(), keep.size()});
    for (std::size_t r = 0; r < data.records(); ++r)
        for (std::size_t i = 0; i < keep.size(); ++i)
            out.values.at(r, i) = data.values.at(r, keep[i]);
    return out;
}

ScalingParams fit_minmax(const RawDataset& train) {
    if (train.records() == 0) throw DataError("fit_minmax: empty dataset");
    const std::size_t F = train.features();
    ScalingParams p;
    p.min_v.assign(F, 0.0);
    p.max_v.assign(F, 0.0);
    for (std::size_t c = 0; c < F; ++c) {
        double lo = train.values.at(0, c), hi = lo;
        for (std::size_t r = 1; r < train.records(); ++r) {
            const double v = train.values.at(r, c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        p.min_v[c] = lo;
        p.max_v[c] = hi;
    }
    return p;
}

RawDataset apply_minmax(const RawDataset& data, const ScalingParams& params) {
    const std::size_t F = data.features();
    if (params.min_v.size() != F || params.max_v.size() != F)
        throw DimensionError("apply_minmax: params cover " +
                             std::to_string(params.min_v.size()) + " features, data has " +
                             std::to_string(F));
    RawDataset out = data;
    for (std::size_t c = 0; c < F; ++c) {
        const double lo = params.min_v[c], span = params.max_v[c] - lo;
        for (std::size_t r = 0; r < data.records(); ++r)
            out.values.at(r, c) = span == 0.0 ? 0.0 : (data.values.at(r, c) - lo) / span;
    }
    return out;
}

RawDataset augment_lag_diff(const RawDataset& data, const AugmentConfig& cfg) {
    if (!cfg.enabled) return data;
    if (cfg.lag < 1) throw ConfigError("augment_lag_diff: lag must be >= 1");
    if (cfg.lag >= data.records())
        throw ConfigError("augment_lag_diff: lag " + std::to_string(cfg.lag) +
                          " >= record count " + std::to_string(data.records()));
    const std::size_t R = data.records() - cfg.lag, F = data.features();
    RawDataset out;
    out.attack_table = data.attack_table;
    out.feature_names = data.feature_names;
    for (const auto& name : data.feature_names)
        out.feature_names.push_back(name + "_d" + std::to_string(cfg.lag));
    out.timestamps.assign(data.timestamps.begin() + static_cast<long>(cfg.lag),
                          data.timestamps.end());
    if (!data.labels.empty())
        out.labels.assign(data.labels.begin() + static_cast<long>(cfg.lag),
                          data.labels.end());
    out.values = Tensor({R, 2 * F});
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < F; ++c) {
            const double now = data.values.at(r + cfg.lag, c);
            out.values.at(r, c) = now;
            out.values.at(r, F + c) = now - data.values.at(r, c);
        }
    return out;
}

std::pair<RawDataset, RawDataset> split_train_val(const RawDataset& data,
                                                  double fraction) {
    const auto R = data.records();
    const auto k = static_cast<std::size_t>(static_cast<double>(R) * fraction);
    if (fraction <= 0.0 || k == 0)
        throw ConfigError("split_train_val: training split is empty at fraction " +
                          std::to_string(fraction));
    if (fraction >= 1.0 || k >= R)
        throw ConfigError("split_train_val: validation split is empty at fraction " +
                          std::to_string(fraction));
    auto slice = [&](std::size_t a, std::size_t b) {
        RawDataset s;
        s.feature_names = data.feature_names;
        s.attack_table = data.attack_table;
        s.timestamps.assign(data.timestamps.begin() + static_cast<long>(a),
                            data.timestamps.begin() + static_cast<long>(b));
        s.values = Tensor({b - a, data.features()});
        std::copy_n(data.values.data() + a * data.features(), (b - a) * data.features(),
                    s.values.data());
        if (!data.labels.empty())
            s.labels.assign(data.labels.begin() + static_cast<long>(a),
                            data.labels.begin() + static_cast<long>(b));
        return s;
    };
    return {slice(0, k), slice(k, R)};
}

std::vector<BatchMeta> make_batches_with_extension(std::size_t records,
                                                   std::size_t batch_count,
                                                   std::size_t n) {
    if (batch_count < 1) throw ConfigError("batch_count must be >= 1");
    if (n < 2) throw ConfigError("window length n must be >= 2");
    if (n >= records)
        throw ConfigError("window length " + std::to_string(n) +
                          " needs more than " + std::to_string(records) + " records");
    const std::size_t base = records / batch_count;
    if (base < n)
        throw ConfigError("base batch length " + std::to_string(base) +
                          " is shorter than window length " + std::to_string(n) +
                          "; lower batch_count");
    std::vector<BatchMeta> out(batch_count);
    for (std::size_t b = 0; b < batch_count; ++b) {
        BatchMeta& m = out[b];
        m.record_begin = b * base;
        m.record_end = (b + 1 == batch_count) ? records : (b + 1) * base;
        m.extended_end = std::min(m.record_end + n - 1, records);
    }
    return out;
}

void WindowedDataset::gather(std::size_t i0, std::size_t i1, Tensor& inputs,
                             Tensor& targets) const {
    const std::size_t B = i1 - i0, F = features();
    inputs.ensure({B, n, F});
    targets.ensure({B, F});
    for (std::size_t i = 0; i < B; ++i) {
        const std::size_t w = window_starts[i0 + i];
        std::copy_n(records.data() + w * F, n * F, inputs.data() + i * n * F);
        std::copy_n(records.data() + target_records[i0 + i] * F, F,
                    targets.data() + i * F);
    }
}

Tensor WindowedDataset::inputs() const {
    Tensor in, tg;
    gather(0, samples(), in, tg);
    return in;
}

Tensor WindowedDataset::targets() const {
    Tensor in, tg;
    gather(0, samples(), in, tg);
    return tg;
}

WindowedDataset window_samples(const RawDataset& data, std::size_t n,
                               const std::vector<BatchMeta>& batches) {
    const std::size_t R = data.records();
    if (n >= R)
        throw ConfigError("window length " + std::to_string(n) + " needs more than " +
                          std::to_string(R) + " records");
    WindowedDataset w;
    w.n = n;
    w.records = data.values;
    w.record_timestamps = data.timestamps;
    w.batches = batches;
    for (BatchMeta& m : w.batches) {
        m.sample_begin = w.window_starts.size();
        // every window start in the base range whose target exists
        const std::size_t stop = std::min(m.record_end, R - n);
        for (std::size_t s = m.record_begin; s < stop; ++s) {
            w.window_starts.push_back(s);
            w.target_records.push_back(s + n);
        }
        m.sample_end = w.window_starts.size();
    }
    return w;
}

}  // namespace icsad::data
