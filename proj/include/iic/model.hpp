#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iic/error.hpp"

namespace iic {

inline constexpr std::size_t kNormRows = 64;
inline constexpr std::size_t kNormCols = 512;
inline constexpr std::size_t kKeyRows = 16;
inline constexpr std::size_t kKeyCols = 256;
inline constexpr std::size_t kKeySize = kKeyRows * kKeyCols;

enum class Side { Left, Right };

/// Identity of one physical eye: subject plus left/right indicator.
class EyeLabel {
public:
    EyeLabel(std::string subject_id, Side side) : subject_id_(std::move(subject_id)), side_(side) {
        if (subject_id_.empty()) throw parse_error("empty subject id");
        for (char c : subject_id_) {
            if (c == ',' || std::isspace(static_cast<unsigned char>(c)))
                throw parse_error("subject id '" + subject_id_ + "' contains a comma or whitespace");
        }
    }

    const std::string& subject_id() const noexcept { return subject_id_; }
    Side side() const noexcept { return side_; }

    friend bool operator==(const EyeLabel&, const EyeLabel&) = default;

private:
    std::string subject_id_;
    Side side_;
};

inline std::string format_label(const EyeLabel& label) {
    return label.subject_id() + (label.side() == Side::Left ? "_L" : "_R");
}

/// Parses `<subject_id>_<L|R>`. The subject id may itself contain underscores;
/// the side is always the suffix after the last one.
inline EyeLabel parse_label(std::string_view text) {
    const auto pos = text.rfind('_');
    if (pos == std::string_view::npos)
        throw parse_error("label '" + std::string(text) + "' has no '_<L|R>' side suffix");
    const std::string_view side = text.substr(pos + 1);
    if (side != "L" && side != "R")
        throw parse_error("label '" + std::string(text) + "': bad side token '" + std::string(side) + "'");
    if (pos == 0) throw parse_error("label '" + std::string(text) + "': empty subject id");
    return EyeLabel(std::string(text.substr(0, pos)), side == "L" ? Side::Left : Side::Right);
}

inline bool label_less(const EyeLabel& a, const EyeLabel& b) { return format_label(a) < format_label(b); }

namespace detail {

inline void require_unit_interval(std::span<const double> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw format_error(std::string(what) + ": value at index " + std::to_string(i) + " outside [0,1]");
    }
}

}  // namespace detail

/// 64x512 rubber-sheet grid, row 0 innermost.
class NormalizedIris {
public:
    NormalizedIris(std::vector<double> pixels, EyeLabel label, std::string sample_id)
        : pixels_(std::move(pixels)), label_(std::move(label)), sample_id_(std::move(sample_id)) {
        if (pixels_.size() != kNormRows * kNormCols)
            throw format_error("normalized iris needs 64x512 values, got " + std::to_string(pixels_.size()));
        detail::require_unit_interval(pixels_, "normalized iris");
    }

    std::span<const double> pixels() const noexcept { return pixels_; }
    double at(std::size_t row, std::size_t col) const { return pixels_[row * kNormCols + col]; }
    const EyeLabel& label() const noexcept { return label_; }
    const std::string& sample_id() const noexcept { return sample_id_; }

private:
    std::vector<double> pixels_;
    EyeLabel label_;
    std::string sample_id_;
};

enum class KeyStage : unsigned char { Raw = 0, Preprocessed = 1, Averaged = 2 };

inline const char* stage_name(KeyStage s) {
    switch (s) {
        case KeyStage::Raw: return "raw";
        case KeyStage::Preprocessed: return "preprocessed";
        case KeyStage::Averaged: return "averaged";
    }
    return "?";
}

/// 16x256 slice of a normalized iris, stored row-major as 4096 values.
class KeyPortion {
public:
    KeyPortion(std::vector<double> values, EyeLabel label, std::string sample_id, KeyStage stage)
        : values_(std::move(values)), label_(std::move(label)), sample_id_(std::move(sample_id)), stage_(stage) {
        if (values_.size() != kKeySize)
            throw format_error("key portion needs 4096 values, got " + std::to_string(values_.size()));
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i]))
                throw format_error("key portion value at index " + std::to_string(i) + " is not finite");
        }
        if (stage_ == KeyStage::Preprocessed) detail::require_unit_interval(values_, "preprocessed key portion");
    }

    std::span<const double> values() const noexcept { return values_; }
    double at(std::size_t row, std::size_t col) const { return values_[row * kKeyCols + col]; }
    const EyeLabel& label() const noexcept { return label_; }
    const std::string& sample_id() const noexcept { return sample_id_; }
    KeyStage stage() const noexcept { return stage_; }

private:
    std::vector<double> values_;
    EyeLabel label_;
    std::string sample_id_;
    KeyStage stage_;
};

/// A point in the low-dimensional intrinsic space.
class IntrinsicIrisCode {
public:
    IntrinsicIrisCode(std::vector<double> coords, EyeLabel label)
        : coords_(std::move(coords)), label_(std::move(label)) {
        if (coords_.empty()) throw usage_error("intrinsic iris code needs at least one coordinate");
        if (!std::all_of(coords_.begin(), coords_.end(), [](double v) { return std::isfinite(v); }))
            throw degenerate_error("intrinsic iris code has a non-finite coordinate");
    }

    std::span<const double> coords() const noexcept { return coords_; }
    std::size_t dim() const noexcept { return coords_.size(); }
    const EyeLabel& label() const noexcept { return label_; }

private:
    std::vector<double> coords_;
    EyeLabel label_;
};

enum class QualityReason { Ok, SaturationExceeded, MadOutOfRange };

inline const char* reason_name(QualityReason r) {
    switch (r) {
        case QualityReason::Ok: return "ok";
        case QualityReason::SaturationExceeded: return "saturation_exceeded";
        case QualityReason::MadOutOfRange: return "mad_out_of_range";
    }
    return "?";
}

struct QualityReport {
    QualityReason reason = QualityReason::Ok;
    long saturated_count = 0;
    double mad = 0.0;

    bool accepted() const noexcept { return reason == QualityReason::Ok; }
};

}  // namespace iic
