#pragma once

#include <stdexcept>
#include <string>

namespace iic {

/// Coarse failure class. The CLI maps these onto exit codes 1/2/3.
enum class ErrorCategory {
    Usage,    // bad arguments or violated preconditions on caller-supplied parameters
    Data,     // malformed input, format violations, unknown labels, compatibility
    Numeric,  // degenerate geometry or spread, rank deficiency
};

inline const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Usage: return "usage";
        case ErrorCategory::Data: return "data";
        case ErrorCategory::Numeric: return "numeric";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, std::string kind, const std::string& detail)
        : std::runtime_error(kind + ": " + detail), category_(category), kind_(std::move(kind)) {}

    ErrorCategory category() const noexcept { return category_; }
    const std::string& kind() const noexcept { return kind_; }

private:
    ErrorCategory category_;
    std::string kind_;
};

inline Error usage_error(const std::string& detail) { return {ErrorCategory::Usage, "usage", detail}; }
inline Error parse_error(const std::string& detail) { return {ErrorCategory::Data, "parse", detail}; }
inline Error format_error(const std::string& detail) { return {ErrorCategory::Data, "format", detail}; }
inline Error unknown_label_error(const std::string& detail) { return {ErrorCategory::Data, "unknown-label", detail}; }
inline Error compatibility_error(const std::string& detail) { return {ErrorCategory::Data, "compatibility", detail}; }
inline Error out_of_bounds_error(const std::string& detail) { return {ErrorCategory::Data, "out-of-bounds", detail}; }
inline Error invalid_geometry_error(const std::string& detail) { return {ErrorCategory::Numeric, "invalid-geometry", detail}; }
inline Error degenerate_error(const std::string& detail) { return {ErrorCategory::Numeric, "degenerate", detail}; }
inline Error insufficient_samples_error(const std::string& detail) { return {ErrorCategory::Numeric, "insufficient-samples", detail}; }
inline Error rank_deficiency_error(const std::string& detail) { return {ErrorCategory::Numeric, "rank-deficiency", detail}; }

}  // namespace iic
