#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iic/error.hpp"
#include "iic/parallel.hpp"

namespace iic {

/// All n(n-1)/2 pairwise Euclidean distances of a point set, sorted ascending.
/// This is the empirical correlation integral in tabulated form.
class DistanceSet {
public:
    DistanceSet(std::size_t n_points, std::vector<double> sorted_distances)
        : n_points_(n_points), distances_(std::move(sorted_distances)) {
        if (n_points_ < 2) throw insufficient_samples_error("a distance set needs at least 2 points");
        if (distances_.size() != n_points_ * (n_points_ - 1) / 2)
            throw usage_error("distance count does not match n(n-1)/2");
        for (std::size_t i = 0; i < distances_.size(); ++i) {
            if (!std::isfinite(distances_[i]) || distances_[i] < 0.0)
                throw degenerate_error("distance set contains a negative or non-finite entry");
            if (i > 0 && distances_[i] < distances_[i - 1]) throw usage_error("distances are not sorted");
        }
    }

    std::size_t n_points() const noexcept { return n_points_; }
    std::size_t size() const noexcept { return distances_.size(); }
    std::span<const double> distances() const noexcept { return distances_; }

private:
    std::size_t n_points_;
    std::vector<double> distances_;
};

inline DistanceSet pairwise_distances(std::span<const std::vector<double>> points, unsigned threads = 1) {
    const std::size_t n = points.size();
    if (n < 2) throw insufficient_samples_error("pairwise distances need at least 2 points, got " + std::to_string(n));
    const std::size_t dim = points.front().size();
    for (std::size_t i = 0; i < n; ++i) {
        if (points[i].size() != dim)
            throw usage_error("point " + std::to_string(i) + " has dimension " + std::to_string(points[i].size()) +
                              ", expected " + std::to_string(dim));
    }
    std::vector<double> out(n * (n - 1) / 2);
    parallel_for(n - 1, threads, [&](std::size_t i) {
        const std::size_t base = i * n - i * (i + 1) / 2;
        const double* a = points[i].data();
        for (std::size_t j = i + 1; j < n; ++j) {
            const double* b = points[j].data();
            double sum = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double diff = a[k] - b[k];
                sum += diff * diff;
            }
            out[base + (j - i - 1)] = std::sqrt(sum);
        }
    });
    std::sort(out.begin(), out.end());
    return DistanceSet(n, std::move(out));
}

/// C(r): fraction of pairs strictly closer than r.
inline double correlation_integral(const DistanceSet& d, double r) {
    if (!(r > 0.0)) throw usage_error("correlation integral radius must be > 0");
    const auto dist = d.distances();
    const auto below = std::lower_bound(dist.begin(), dist.end(), r) - dist.begin();
    return static_cast<double>(below) / static_cast<double>(dist.size());
}

/// q-quantile of an ascending sequence, interpolating linearly between order
/// statistics at position q*(size-1).
inline double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw usage_error("quantile of an empty sequence");
    if (!(q > 0.0 && q < 1.0)) throw usage_error("neighborhood fraction must be in (0,1)");
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// The radius at which C(r) reaches q.
inline double radius_at_fraction(const DistanceSet& d, double q) { return sorted_quantile(d.distances(), q); }

struct DimEstimate {
    double lo_pct = 0.0;
    double hi_pct = 0.0;
    double slope = 0.0;
    double fit_rmse = 0.0;
    int n_fit_points = 0;
};

inline constexpr int kDefaultFitPoints = 16;
inline constexpr double kMaxZeroDistanceFraction = 0.01;

/// Correlation-dimension estimate over a neighborhood range given as
/// percentages of the pair-distance distribution: the OLS slope of log C(r)
/// against log r at n_fit_points log-spaced radii between the two quantiles.
inline DimEstimate estimate_dimension(const DistanceSet& d, double lo_pct, double hi_pct,
                                      int n_fit_points = kDefaultFitPoints) {
    if (!(lo_pct > 0.0 && hi_pct < 100.0 && lo_pct < hi_pct))
        throw usage_error("need 0 < lo_pct < hi_pct < 100");
    if (n_fit_points < 2) throw usage_error("need at least 2 fit points");

    const auto dist = d.distances();
    const auto zeros = std::upper_bound(dist.begin(), dist.end(), 0.0) - dist.begin();
    if (static_cast<double>(zeros) > kMaxZeroDistanceFraction * static_cast<double>(dist.size()))
        throw degenerate_error(std::to_string(zeros) + " of " + std::to_string(dist.size()) +
                               " pair distances are zero");

    const double r_lo = radius_at_fraction(d, lo_pct / 100.0);
    const double r_hi = radius_at_fraction(d, hi_pct / 100.0);
    if (!(r_lo > 0.0) || !(r_hi > r_lo))
        throw degenerate_error("neighborhood radii collapse (r_lo=" + std::to_string(r_lo) +
                               ", r_hi=" + std::to_string(r_hi) + ")");

    const double log_lo = std::log(r_lo);
    const double log_hi = std::log(r_hi);
    std::vector<double> xs(static_cast<std::size_t>(n_fit_points));
    std::vector<double> ys(xs.size());
    for (int i = 0; i < n_fit_points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n_fit_points - 1);
        const double log_r = log_lo + t * (log_hi - log_lo);
        const double c = correlation_integral(d, std::exp(log_r));
        if (!(c > 0.0)) throw degenerate_error("correlation integral is zero inside the fit range");
        xs[static_cast<std::size_t>(i)] = log_r;
        ys[static_cast<std::size_t>(i)] = std::log(c);
    }

    const double n = static_cast<double>(n_fit_points);
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mean_x += xs[i];
        mean_y += ys[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mean_x) * (xs[i] - mean_x);
        sxy += (xs[i] - mean_x) * (ys[i] - mean_y);
    }
    const double slope = sxy / sxx;
    const double intercept = mean_y - slope * mean_x;
    double sse = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double res = ys[i] - (intercept + slope * xs[i]);
        sse += res * res;
    }
    return {lo_pct, hi_pct, std::max(slope, 0.0), std::sqrt(sse / n), n_fit_points};
}

inline DimEstimate estimate_dimension(std::span<const std::vector<double>> points, double lo_pct, double hi_pct,
                                      int n_fit_points = kDefaultFitPoints, unsigned threads = 1) {
    return estimate_dimension(pairwise_distances(points, threads), lo_pct, hi_pct, n_fit_points);
}

using PercentRange = std::pair<double, double>;

/// The twelve neighborhood ranges: eight 10-point windows, then four windows
/// centered on 50%.
inline std::vector<PercentRange> default_ranges() {
    return {{10, 20}, {20, 30}, {30, 40}, {40, 50}, {50, 60}, {60, 70},
            {70, 80}, {80, 90}, {10, 90}, {20, 80}, {30, 70}, {40, 60}};
}

inline std::vector<DimEstimate> dimension_table(const DistanceSet& d, std::span<const PercentRange> ranges,
                                                int n_fit_points = kDefaultFitPoints) {
    std::vector<DimEstimate> out;
    out.reserve(ranges.size());
    for (const auto& [lo, hi] : ranges) out.push_back(estimate_dimension(d, lo, hi, n_fit_points));
    return out;
}

inline std::vector<DimEstimate> dimension_table(std::span<const std::vector<double>> points,
                                                std::span<const PercentRange> ranges,
                                                int n_fit_points = kDefaultFitPoints, unsigned threads = 1) {
    return dimension_table(pairwise_distances(points, threads), ranges, n_fit_points);
}

}  // namespace iic
