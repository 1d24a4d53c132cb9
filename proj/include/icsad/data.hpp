#pragma once

// Dataset ingestion and windowing: CSV loading against a schema, warm-up
// trimming, (0,1) min-max scaling fitted on training data only, lag-diff
// feature augmentation, chronological train/val split, and the batch
// extension scheme that makes every record from index n onward the target
// of exactly one sliding window.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icsad/tensor.hpp"

namespace icsad::data {

struct AttackLabel {
    int attack_id = 0;
    std::int64_t start = 0, end = 0;  // timestamps, half-open [start, end)
    std::vector<std::string> stage_tags;
    std::string description;
    bool expected_impact_achieved = true;
};

struct Schema {
    std::string timestamp_column = "Timestamp";
    std::string label_column = "Normal/Attack";               // optional in the file
    std::vector<std::pair<std::string, std::string>> stages;  // feature -> stage tag
    std::vector<std::string> categorical;                     // read as reals, kept for documentation

    std::string stage_of(const std::string& feature) const;
};

struct RawDataset {
    std::vector<std::int64_t> timestamps;  // strictly increasing, 1 Hz
    Tensor values;                         // [records, features]
    std::vector<std::string> feature_names;
    std::vector<std::uint8_t> labels;      // empty, or one 0/1 flag per record
    std::vector<AttackLabel> attack_table;

    std::size_t records() const { return timestamps.size(); }
    std::size_t features() const { return feature_names.size(); }
};

struct ScalingParams {
    std::vector<double> min_v, max_v;  // per feature, from the TRAINING set only
};

struct AugmentConfig {
    std::size_t lag = 1;  // Eq. 7 lag, seconds
    bool enabled = true;
};

struct BatchMeta {
    std::size_t record_begin = 0, record_end = 0;  // base range [s_b, e_b)
    std::size_t extended_end = 0;                  // min(e_b + n - 1, records)
    std::size_t sample_begin = 0, sample_end = 0;  // row range into the sample list
};

// Windows are described by start indices into the shared record matrix and
// materialized per chunk via gather(); inputs()/targets() materialize the
// whole set for small datasets and tests.
struct WindowedDataset {
    Tensor records;  // [R, F] preprocessed record matrix
    std::vector<std::int64_t> record_timestamps;
    std::vector<std::size_t> window_starts;   // sample i covers [w_i, w_i + n)
    std::vector<std::size_t> target_records;  // w_i + n
    std::vector<BatchMeta> batches;
    std::size_t n = 0;

    std::size_t samples() const { return window_starts.size(); }
    std::size_t features() const { return records.rank() == 2 ? records.dim(1) : 0; }

    // materialize samples [i0, i1) as inputs [i1-i0, n, F], targets [i1-i0, F]
    void gather(std::size_t i0, std::size_t i1, Tensor& inputs, Tensor& targets) const;
    Tensor inputs() const;
    Tensor targets() const;
};

// Header row required. Timestamps are integer seconds or SWaT-style
// "DD/MM/YYYY H:MM:SS AM" datetimes; cadence must be exactly 1 Hz. Labels
// "Normal"/"Attack" (the dataset's stray-space variant "A ttack" included)
// map to 0/1. Any feature named in schema.stages must be present.
RawDataset load_csv(const std::string& path, const Schema& schema);

void save_csv(const std::string& path, const RawDataset& data, const Schema& schema);

std::vector<AttackLabel> load_attack_table(const std::string& path);
void save_attack_table(const std::string& path, const std::vector<AttackLabel>& table);

RawDataset trim_warmup(const RawDataset& data, std::size_t count);

// keep only features whose schema stage tag matches
RawDataset select_stage(const RawDataset& data, const Schema& schema,
                        const std::string& stage);

ScalingParams fit_minmax(const RawDataset& train);
// x' = (x - min) / (max - min); constant features map to 0; no clipping.
RawDataset apply_minmax(const RawDataset& data, const ScalingParams& params);

// Appends x_t - x_{t-lag} per feature (feature count doubles) and drops the
// first `lag` records so every difference is defined.
RawDataset augment_lag_diff(const RawDataset& data, const AugmentConfig& cfg);

// chronological split: first `fraction` of records for training
std::pair<RawDataset, RawDataset> split_train_val(const RawDataset& data,
                                                  double fraction);

// Contiguous equal base batches (remainder to the last), each extended by
// the first n-1 records of its successor.
std::vector<BatchMeta> make_batches_with_extension(std::size_t records,
                                                   std::size_t batch_count,
                                                   std::size_t n);

WindowedDataset window_samples(const RawDataset& data, std::size_t n,
                               const std::vector<BatchMeta>& batches);

}  // namespace icsad::data
