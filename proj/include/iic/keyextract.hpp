#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iic/error.hpp"
#include "iic/model.hpp"

namespace iic {

/// Thresholds for the key-portion preprocessing chain. The saturation and MAD
/// bounds are on the [0,1] raw intensity scale.
struct PreprocessConfig {
    double mad_span = 3.5;
    long saturation_threshold_count = 5;
    double saturation_level = 0.98;
    double mad_min = 0.01;
    double mad_max = 0.25;
    int kernel_size = 5;
    int angular_offset_cols = 0;

    void validate() const {
        if (!(mad_span > 0.0)) throw usage_error("mad_span must be > 0");
        if (saturation_threshold_count < 0) throw usage_error("saturation_threshold_count must be >= 0");
        if (!(saturation_level > 0.0 && saturation_level <= 1.0)) throw usage_error("saturation_level must be in (0,1]");
        if (!(mad_min >= 0.0) || !(mad_min < mad_max)) throw usage_error("need 0 <= mad_min < mad_max");
        if (kernel_size < 1 || kernel_size % 2 == 0 || kernel_size > 15)
            throw usage_error("kernel_size must be odd and in [1,15]");
        if (angular_offset_cols < 0 || angular_offset_cols >= static_cast<int>(kNormCols))
            throw usage_error("angular_offset_cols must be in [0,512)");
    }
};

/// Rows 0..15 of the normalized iris, columns offset..offset+255 wrapping at 512.
inline KeyPortion extract_key(const NormalizedIris& norm, int offset_cols) {
    if (offset_cols < 0 || offset_cols >= static_cast<int>(kNormCols))
        throw usage_error("key offset " + std::to_string(offset_cols) + " outside [0,512)");
    std::vector<double> values(kKeySize);
    for (std::size_t r = 0; r < kKeyRows; ++r) {
        for (std::size_t c = 0; c < kKeyCols; ++c) {
            values[r * kKeyCols + c] = norm.at(r, (c + static_cast<std::size_t>(offset_cols)) % kNormCols);
        }
    }
    return KeyPortion(std::move(values), norm.label(), norm.sample_id(), KeyStage::Raw);
}

struct MadStats {
    double median = 0.0;
    double mad = 0.0;
};

namespace detail {

// Consumes its argument.
inline double median_inplace(std::vector<double>& v) {
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double upper = *mid;
    if (n % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

}  // namespace detail

inline MadStats mad_stats(std::span<const double> values) {
    if (values.empty()) throw usage_error("mad_stats of an empty vector");
    std::vector<double> work(values.begin(), values.end());
    const double median = detail::median_inplace(work);
    for (std::size_t i = 0; i < values.size(); ++i) work[i] = std::abs(values[i] - median);
    return {median, detail::median_inplace(work)};
}

/// Saturation is checked before spread; a key failing both reports saturation.
inline QualityReport quality_filter(const KeyPortion& key, const PreprocessConfig& cfg) {
    QualityReport report;
    report.saturated_count = static_cast<long>(std::count_if(
        key.values().begin(), key.values().end(), [&](double v) { return v >= cfg.saturation_level; }));
    report.mad = mad_stats(key.values()).mad;
    if (report.saturated_count > cfg.saturation_threshold_count)
        report.reason = QualityReason::SaturationExceeded;
    else if (report.mad < cfg.mad_min || report.mad > cfg.mad_max)
        report.reason = QualityReason::MadOutOfRange;
    return report;
}

/// Centers on the median and maps median +/- mad_span*MAD onto [0,1],
/// clamping values outside that span.
inline KeyPortion normalize_range(const KeyPortion& key, double mad_span) {
    if (!(mad_span > 0.0)) throw usage_error("mad_span must be > 0");
    const MadStats stats = mad_stats(key.values());
    if (!(stats.mad > 0.0)) throw degenerate_error("key '" + key.sample_id() + "' has zero MAD");
    const double scale = mad_span * stats.mad;
    std::vector<double> out(kKeySize);
    for (std::size_t i = 0; i < kKeySize; ++i) {
        const double z = std::clamp((key.values()[i] - stats.median) / scale, -1.0, 1.0);
        out[i] = 0.5 * (z + 1.0);
    }
    return KeyPortion(std::move(out), key.label(), key.sample_id(), KeyStage::Preprocessed);
}

/// Box filter over the 16x256 grid. Columns wrap (the grid is angularly
/// periodic), rows replicate their edge.
inline KeyPortion smooth(const KeyPortion& key, int kernel_size) {
    if (kernel_size < 1 || kernel_size % 2 == 0 || kernel_size > 15)
        throw usage_error("kernel size must be odd and in [1,15], got " + std::to_string(kernel_size));
    const int half = kernel_size / 2;
    const int rows = static_cast<int>(kKeyRows);
    const int cols = static_cast<int>(kKeyCols);

    // Separable: columns (circular) first, then rows (replicate).
    std::vector<double> horiz(kKeySize);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double sum = 0.0;
            for (int dc = -half; dc <= half; ++dc) sum += key.at(r, ((c + dc) % cols + cols) % cols);
            horiz[r * cols + c] = sum;
        }
    }
    std::vector<double> out(kKeySize);
    const double norm = 1.0 / (static_cast<double>(kernel_size) * kernel_size);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            double sum = 0.0;
            for (int dr = -half; dr <= half; ++dr) sum += horiz[std::clamp(r + dr, 0, rows - 1) * cols + c];
            out[r * cols + c] = sum * norm;
        }
    }
    // Guard the [0,1] invariant against last-ulp overshoot on constant inputs.
    const auto [lo, hi] = std::minmax_element(key.values().begin(), key.values().end());
    for (double& v : out) v = std::clamp(v, *lo, *hi);
    const KeyStage stage = key.stage() == KeyStage::Raw ? KeyStage::Preprocessed : key.stage();
    return KeyPortion(std::move(out), key.label(), key.sample_id(), stage);
}

struct PreprocessOutcome {
    QualityReport report;
    std::optional<KeyPortion> key;  // present iff report.accepted()
};

/// quality_filter on raw values, then normalize_range, then smooth.
inline PreprocessOutcome preprocess(const KeyPortion& key, const PreprocessConfig& cfg) {
    if (key.stage() != KeyStage::Raw) throw usage_error("preprocess expects a raw key portion");
    cfg.validate();
    PreprocessOutcome outcome{quality_filter(key, cfg), std::nullopt};
    if (!outcome.report.accepted()) return outcome;
    outcome.key = smooth(normalize_range(key, cfg.mad_span), cfg.kernel_size);
    return outcome;
}

/// One elementwise mean per distinct eye, ordered by formatted label. The
/// output sample_id is the formatted label.
inline std::vector<KeyPortion> average_per_eye(std::span<const KeyPortion> keys) {
    if (keys.empty()) throw usage_error("average_per_eye of an empty list");
    struct Acc {
        const EyeLabel* label;
        std::vector<double> sum;
        std::size_t count = 0;
    };
    std::map<std::string, Acc> groups;
    for (const KeyPortion& k : keys) {
        auto [it, inserted] = groups.try_emplace(format_label(k.label()), Acc{&k.label(), std::vector<double>(kKeySize), 0});
        Acc& acc = it->second;
        for (std::size_t i = 0; i < kKeySize; ++i) acc.sum[i] += k.values()[i];
        ++acc.count;
    }
    std::vector<KeyPortion> out;
    out.reserve(groups.size());
    for (auto& [name, acc] : groups) {
        const double count = static_cast<double>(acc.count);
        for (double& v : acc.sum) v /= count;
        out.emplace_back(std::move(acc.sum), *acc.label, name, KeyStage::Averaged);
    }
    return out;
}

}  // namespace iic
