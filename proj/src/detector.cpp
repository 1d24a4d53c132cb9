#include "icsad/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "icsad/errors.hpp"

namespace icsad::det {

namespace {

std::string feature_label(std::size_t f, const std::vector<std::string>& names) {
    if (f < names.size()) return names[f];
    return "f" + std::to_string(f);
}

void require_matrix(const Tensor& t, const char* what) {
    if (t.rank() != 2)
        throw DimensionError(std::string(what) + " must be [samples, features], got rank " +
                             std::to_string(t.rank()));
}

const std::vector<std::size_t>& resolve_map(const Tensor& values,
                                            const std::vector<std::size_t>& sample_to_record,
                                            std::vector<std::size_t>& scratch) {
    if (sample_to_record.empty()) {
        scratch.resize(values.dim(0));
        for (std::size_t i = 0; i < scratch.size(); ++i) scratch[i] = i;
        return scratch;
    }
    if (sample_to_record.size() != values.dim(0))
        throw DimensionError("sample-to-record map covers " +
                             std::to_string(sample_to_record.size()) + " samples, scores have " +
                             std::to_string(values.dim(0)));
    return sample_to_record;
}

// Collapse a per-sample firing series into intervals over record indices.
// Each maximal run of fired samples becomes one interval; peaks carry over.
std::vector<AnomalyInterval> merge_fired(const std::vector<char>& fired,
                                         const std::vector<double>& score,
                                         const std::vector<std::size_t>& peak_feature,
                                         const std::vector<std::size_t>& to_record,
                                         const std::vector<std::string>& names) {
    std::vector<AnomalyInterval> out;
    const std::size_t n = fired.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!fired[i]) continue;
        std::size_t j = i;
        std::size_t best = i;
        while (j + 1 < n && fired[j + 1]) {
            ++j;
            if (score[j] > score[best]) best = j;
        }
        AnomalyInterval iv;
        iv.start_index = to_record[i];
        iv.end_index = to_record[j] + 1;
        iv.peak_zscore = score[best];
        iv.triggering_feature = feature_label(peak_feature[best], names);
        out.push_back(std::move(iv));
        i = j;
    }
    return out;
}

}  // namespace

Tensor prediction_errors(const Tensor& predicted, const Tensor& observed) {
    if (!predicted.same_shape(observed))
        throw DimensionError("prediction/observation shapes differ: " + predicted.shape_str() +
                             " vs " + observed.shape_str());
    Tensor e(predicted.shape());
    for (std::size_t i = 0; i < e.numel(); ++i)
        e.data()[i] = std::abs(predicted.data()[i] - observed.data()[i]);
    return e;
}

ErrorStats fit_error_stats(const Tensor& errors, double sigma_floor) {
    require_matrix(errors, "error matrix");
    if (sigma_floor <= 0.0)
        throw ConfigError("sigma_floor must be positive, got " + std::to_string(sigma_floor));
    const std::size_t rows = errors.dim(0), cols = errors.dim(1);
    if (rows == 0) throw DataError("cannot fit error statistics on zero samples");

    ErrorStats st;
    st.mu = Tensor({cols});
    st.sigma = Tensor({cols});
    st.fitted_on = rows;
    for (std::size_t f = 0; f < cols; ++f) {
        double mean = 0.0;
        for (std::size_t t = 0; t < rows; ++t) mean += errors.at(t, f);
        mean /= static_cast<double>(rows);
        double var = 0.0;
        for (std::size_t t = 0; t < rows; ++t) {
            const double d = errors.at(t, f) - mean;
            var += d * d;
        }
        var /= static_cast<double>(rows);  // population variance
        st.mu.vec()[f] = mean;
        st.sigma.vec()[f] = std::max(std::sqrt(var), sigma_floor);
    }
    return st;
}

Tensor zscores(const Tensor& errors, const ErrorStats& stats) {
    require_matrix(errors, "error matrix");
    const std::size_t cols = errors.dim(1);
    if (stats.mu.rank() != 1 || stats.mu.dim(0) != cols || !stats.mu.same_shape(stats.sigma))
        throw DimensionError("error statistics cover " + std::to_string(stats.mu.numel()) +
                             " features, errors have " + std::to_string(cols));
    Tensor z(errors.shape());
    for (std::size_t t = 0; t < errors.dim(0); ++t)
        for (std::size_t f = 0; f < cols; ++f)
            z.at(t, f) = std::abs(errors.at(t, f) - stats.mu.vec()[f]) / stats.sigma.vec()[f];
    return z;
}

std::vector<AnomalyInterval> detect(const Tensor& zscores, const DetectorConfig& cfg,
                                    const std::vector<std::size_t>& sample_to_record,
                                    const std::vector<std::string>& feature_names) {
    require_matrix(zscores, "z-score matrix");
    if (cfg.threshold <= 0.0)
        throw ConfigError("detection threshold must be positive, got " +
                          std::to_string(cfg.threshold));
    if (cfg.window < 1) throw ConfigError("detection window must be at least 1 sample");
    const std::size_t n = zscores.dim(0), cols = zscores.dim(1);
    if (cfg.window > n)
        throw ConfigError("detection window of " + std::to_string(cfg.window) +
                          " samples exceeds the " + std::to_string(n) + " available");
    std::vector<std::size_t> scratch;
    const auto& to_record = resolve_map(zscores, sample_to_record, scratch);

    std::vector<double> score(n);
    std::vector<std::size_t> arg(n, 0);
    for (std::size_t t = 0; t < n; ++t) {
        double best = zscores.at(t, 0);
        std::size_t bf = 0;
        for (std::size_t f = 1; f < cols; ++f) {
            if (zscores.at(t, f) > best) {
                best = zscores.at(t, f);
                bf = f;
            }
        }
        score[t] = best;
        arg[t] = bf;
    }

    // A sample fires once the last W scores all exceed T; a maximal run of
    // exceedances therefore fires from its W-th sample to its end, and the
    // reported interval is backdated to cover the whole run. Runs shorter
    // than W never fire.
    std::vector<char> fired(n, 0);
    std::size_t run = 0;
    for (std::size_t t = 0; t < n; ++t) {
        run = score[t] > cfg.threshold ? run + 1 : 0;
        if (run >= cfg.window)
            for (std::size_t k = t + 1 - run; k <= t; ++k) fired[k] = 1;
    }
    return merge_fired(fired, score, arg, to_record, feature_names);
}

std::vector<AnomalyInterval> cusum_detect(const Tensor& values, const CusumConfig& cfg,
                                          const std::vector<std::size_t>& sample_to_record,
                                          const std::vector<std::string>& feature_names) {
    require_matrix(values, "input matrix");
    const std::size_t n = values.dim(0), cols = values.dim(1);

    auto per_feature = [&](const std::vector<double>& overrides, double scalar,
                           const char* what) {
        if (overrides.empty()) return std::vector<double>(cols, scalar);
        if (overrides.size() != cols)
            throw ConfigError(std::string(what) + " overrides cover " +
                              std::to_string(overrides.size()) + " features, input has " +
                              std::to_string(cols));
        return overrides;
    };
    const auto drift = per_feature(cfg.drift_per_feature, cfg.drift, "drift");
    const auto ucl = per_feature(cfg.ucl_per_feature, cfg.ucl, "UCL");
    const auto lcl = per_feature(cfg.lcl_per_feature, cfg.lcl, "LCL");
    for (std::size_t f = 0; f < cols; ++f) {
        if (drift[f] < 0.0) throw ConfigError("CUSUM drift must be non-negative");
        if (ucl[f] <= 0.0) throw ConfigError("CUSUM UCL must be positive");
        if (lcl[f] >= 0.0) throw ConfigError("CUSUM LCL must be negative");
    }
    std::vector<std::size_t> scratch;
    const auto& to_record = resolve_map(values, sample_to_record, scratch);

    std::vector<double> sh(cols, 0.0), sl(cols, 0.0);
    std::vector<char> fired(n, 0);
    std::vector<double> score(n, 0.0);
    std::vector<std::size_t> arg(n, 0);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t f = 0; f < cols; ++f) {
            const double x = values.at(t, f);
            sh[f] = std::max(0.0, sh[f] + x - drift[f]);
            sl[f] = std::min(0.0, sl[f] + x + drift[f]);
            if (sh[f] > ucl[f] || sl[f] < lcl[f]) {
                fired[t] = 1;
                const double mag = std::max(sh[f], -sl[f]);
                if (mag > score[t]) {
                    score[t] = mag;
                    arg[t] = f;
                }
            }
        }
    }
    return merge_fired(fired, score, arg, to_record, feature_names);
}

}  // namespace icsad::det
