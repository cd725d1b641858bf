#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "iic/error.hpp"
#include "iic/model.hpp"

namespace iic {

struct Circle {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;

    friend bool operator==(const Circle&, const Circle&) = default;
};

inline void validate_circle(const Circle& c, const char* what) {
    if (!std::isfinite(c.cx) || !std::isfinite(c.cy) || !std::isfinite(c.r) || !(c.r > 0.0))
        throw invalid_geometry_error(std::string(what) + " circle needs finite center and r > 0");
}

/// Grayscale eye-camera image, row-major, intensities in [0,1].
class EyeImage {
public:
    EyeImage(int width, int height, std::vector<double> pixels, EyeLabel label, std::string sample_id)
        : width_(width), height_(height), pixels_(std::move(pixels)), label_(std::move(label)),
          sample_id_(std::move(sample_id)) {
        if (width_ <= 0 || height_ <= 0) throw format_error("eye image needs positive dimensions");
        if (pixels_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_))
            throw format_error("eye image pixel count does not match width x height");
        detail::require_unit_interval(pixels_, "eye image");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::span<const double> pixels() const noexcept { return pixels_; }
    double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
    const EyeLabel& label() const noexcept { return label_; }
    const std::string& sample_id() const noexcept { return sample_id_; }

private:
    int width_;
    int height_;
    std::vector<double> pixels_;
    EyeLabel label_;
    std::string sample_id_;
};

/// Pulls the pupil boundary outward by 10% and the limbus inward by 5% of the
/// annulus width, trimming stray pupil and sclera pixels.
inline std::pair<double, double> trim_radii(double r_pupil, double r_iris) {
    if (!std::isfinite(r_pupil) || !std::isfinite(r_iris) || !(r_pupil > 0.0) || !(r_pupil < r_iris))
        throw invalid_geometry_error("need 0 < r_pupil < r_iris, got (" + std::to_string(r_pupil) + ", " +
                                     std::to_string(r_iris) + ")");
    const double width = r_iris - r_pupil;
    return {r_pupil + 0.10 * width, r_iris - 0.05 * width};
}

namespace detail {

inline double bilinear(const EyeImage& img, double x, double y) {
    const int x0 = std::min(static_cast<int>(std::floor(x)), img.width() - 2 < 0 ? 0 : img.width() - 2);
    const int y0 = std::min(static_cast<int>(std::floor(y)), img.height() - 2 < 0 ? 0 : img.height() - 2);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
    const double bottom = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
    return (1.0 - fy) * top + fy * bottom;
}

}  // namespace detail

/// Rubber-sheet unwrap into a 64x512 grid.
///
/// Column j looks along angle 2*pi*(j + origin_cols)/512 (0 = +x, increasing
/// toward +y, i.e. image-down). Row k samples at t = (k + 0.5)/64 on the
/// segment from the trimmed pupil boundary point to the trimmed iris boundary
/// point at that angle, so circles need not be concentric. Samples that fall
/// outside the image are an error; nothing is padded.
inline NormalizedIris unwrap(const EyeImage& image, const Circle& pupil, const Circle& iris, int origin_cols = 0) {
    validate_circle(pupil, "pupil");
    validate_circle(iris, "iris");
    const auto [r_in, r_out] = trim_radii(pupil.r, iris.r);

    const double x_max = image.width() - 1;
    const double y_max = image.height() - 1;
    const int origin = ((origin_cols % static_cast<int>(kNormCols)) + static_cast<int>(kNormCols)) %
                       static_cast<int>(kNormCols);

    std::vector<double> out(kNormRows * kNormCols);
    for (std::size_t j = 0; j < kNormCols; ++j) {
        const std::size_t a = (j + static_cast<std::size_t>(origin)) % kNormCols;
        const double theta = 2.0 * std::numbers::pi * static_cast<double>(a) / static_cast<double>(kNormCols);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const double xi = pupil.cx + r_in * c;
        const double yi = pupil.cy + r_in * s;
        const double xo = iris.cx + r_out * c;
        const double yo = iris.cy + r_out * s;
        for (std::size_t k = 0; k < kNormRows; ++k) {
            const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(kNormRows);
            const double x = (1.0 - t) * xi + t * xo;
            const double y = (1.0 - t) * yi + t * yo;
            if (!(x >= 0.0 && x <= x_max && y >= 0.0 && y <= y_max))
                throw out_of_bounds_error("sample (row " + std::to_string(k) + ", col " + std::to_string(j) +
                                          ") falls outside the image");
            out[k * kNormCols + j] = std::clamp(detail::bilinear(image, x, y), 0.0, 1.0);
        }
    }
    return NormalizedIris(std::move(out), image.label(), image.sample_id());
}

}  // namespace iic
