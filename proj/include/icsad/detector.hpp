#pragma once

// Turns per-window prediction errors into anomaly intervals: normalize by
// attack-free error statistics, take the max z-score across features, and
// fire once the score stays above threshold T for W consecutive samples.
// A standard two-sided CUSUM detector is included as a comparison baseline.

#include <cstddef>
#include <string>
#include <vector>

#include "icsad/tensor.hpp"

namespace icsad::det {

struct ErrorStats {
    Tensor mu, sigma;  // [features]; sigma is floored, never zero
    std::size_t fitted_on = 0;  // rows the stats were computed from
};

struct DetectorConfig {
    double threshold = 2.0;     // T: z-score level that counts as suspicious
    std::size_t window = 100;   // W: consecutive samples required (seconds at 1 Hz)
    double sigma_floor = 1e-6;  // lower bound for per-feature sigma
};

// Drift/limit defaults are in z-score units (the detector normally runs on
// z-scored errors); per-feature vectors override the scalars when non-empty.
struct CusumConfig {
    double drift = 0.5;  // omega
    double ucl = 5.0;
    double lcl = -5.0;
    std::vector<double> drift_per_feature;
    std::vector<double> ucl_per_feature;
    std::vector<double> lcl_per_feature;
};

struct AnomalyInterval {
    std::size_t start_index = 0;  // half-open record range [start, end)
    std::size_t end_index = 0;
    double peak_zscore = 0.0;  // max score inside the interval (CUSUM: max |sum| excess side)
    std::string triggering_feature;  // feature attaining the peak
};

// e = |predicted - observed| elementwise; shapes must match.
Tensor prediction_errors(const Tensor& predicted, const Tensor& observed);

// Per-feature mean and population standard deviation of the error matrix
// [samples, features]. Must be fit on attack-free data (the validation
// split); sigma below the floor is replaced by it.
ErrorStats fit_error_stats(const Tensor& errors, double sigma_floor = 1e-6);

// z[t][f] = |e[t][f] - mu[f]| / sigma[f]
Tensor zscores(const Tensor& errors, const ErrorStats& stats);

// Score each sample as max_f z[t][f]; an anomaly exists wherever a run of at
// least W consecutive samples all score above T. Each qualifying run becomes
// one interval covering the entire run (the report is backdated to the run's
// first sample, not the W-th). sample_to_record maps sample indices to the
// record indices the intervals are reported in (a window's target record).
// feature_names label triggering_feature; empty -> "f<index>".
std::vector<AnomalyInterval> detect(const Tensor& zscores, const DetectorConfig& cfg,
                                    const std::vector<std::size_t>& sample_to_record,
                                    const std::vector<std::string>& feature_names = {});

// Two-sided CUSUM per feature, fired states OR-combined across features:
//   SH_{t+1} = max(0, SH_t + x_t - omega),  SL_{t+1} = min(0, SL_t + x_t + omega)
// starting from SH_0 = SL_0 = 0; sample t fires when, after its update,
// SH > UCL or SL < LCL for any feature. Consecutive firing samples merge.
// Empty sample_to_record means identity mapping.
std::vector<AnomalyInterval> cusum_detect(const Tensor& values, const CusumConfig& cfg,
                                          const std::vector<std::size_t>& sample_to_record = {},
                                          const std::vector<std::string>& feature_names = {});

}  // namespace icsad::det
