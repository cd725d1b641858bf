#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iic/error.hpp"
#include "iic/model.hpp"

namespace iic {

/// Linear map into intrinsic space: a mean vector plus d orthonormal
/// principal directions, strongest first.
class IntrinsicMap {
public:
    IntrinsicMap(std::vector<double> mean, std::vector<std::vector<double>> components,
                 std::vector<double> explained_variance)
        : mean_(std::move(mean)), components_(std::move(components)), variance_(std::move(explained_variance)) {
        if (components_.empty()) throw usage_error("intrinsic map needs d >= 1");
        if (variance_.size() != components_.size()) throw format_error("one explained variance per component");
        for (const auto& c : components_) {
            if (c.size() != mean_.size()) throw format_error("component length differs from mean length");
        }
    }

    std::size_t d() const noexcept { return components_.size(); }
    std::size_t input_dim() const noexcept { return mean_.size(); }
    std::span<const double> mean() const noexcept { return mean_; }
    std::span<const double> component(std::size_t i) const { return components_.at(i); }
    std::span<const double> explained_variance() const noexcept { return variance_; }

private:
    std::vector<double> mean_;
    std::vector<std::vector<double>> components_;
    std::vector<double> variance_;
};

namespace detail {

// Within each direction the largest-magnitude element (lowest index on ties)
// is made positive.
inline void canonical_sign(std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[best])) best = i;
    }
    if (v[best] < 0.0) {
        for (double& x : v) x = -x;
    }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace detail

inline constexpr double kRankTolerance = 1e-10;

/// PCA on the rows of `samples`. Eigen-decomposes whichever of the Gram
/// (n x n) or covariance (D x D) matrices is smaller. Variances use n-1
/// normalisation.
inline IntrinsicMap fit_map(std::span<const std::vector<double>> samples, std::size_t d) {
    if (d < 1) throw usage_error("map dimension must be >= 1");
    const std::size_t n = samples.size();
    if (n <= d)
        throw insufficient_samples_error("fitting d=" + std::to_string(d) + " needs more than " + std::to_string(d) +
                                         " samples, got " + std::to_string(n));
    const std::size_t dim = samples.front().size();
    if (d > dim) throw usage_error("map dimension exceeds input dimension");

    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Mat x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        if (samples[i].size() != dim) throw usage_error("sample " + std::to_string(i) + " has the wrong length");
        for (std::size_t k = 0; k < dim; ++k) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = samples[i][k];
    }
    const Eigen::RowVectorXd mean = x.colwise().sum() / static_cast<double>(n);
    x.rowwise() -= mean;

    const bool use_gram = n <= dim;
    const Eigen::MatrixXd scatter = use_gram ? Eigen::MatrixXd(x * x.transpose()) : Eigen::MatrixXd(x.transpose() * x);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter);
    if (solver.info() != Eigen::Success) throw degenerate_error("eigen-decomposition did not converge");

    // Eigenvalues come back ascending.
    const auto& evals = solver.eigenvalues();
    const Eigen::Index m = evals.size();
    const double largest = std::max(evals(m - 1), 0.0);
    std::vector<std::vector<double>> components;
    std::vector<double> variances;
    for (std::size_t i = 0; i < d; ++i) {
        const Eigen::Index idx = m - 1 - static_cast<Eigen::Index>(i);
        const double lambda = evals(idx);
        if (!(largest > 0.0) || !(lambda > kRankTolerance * largest))
            throw rank_deficiency_error("centered data has rank < " + std::to_string(d));
        Eigen::VectorXd dir = use_gram ? Eigen::VectorXd(x.transpose() * solver.eigenvectors().col(idx))
                                       : Eigen::VectorXd(solver.eigenvectors().col(idx));
        std::vector<double> v(dir.data(), dir.data() + dir.size());
        // Two Gram-Schmidt passes against earlier directions, then normalise.
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& prev : components) {
                const double p = detail::dot(v, prev);
                for (std::size_t k = 0; k < dim; ++k) v[k] -= p * prev[k];
            }
            const double norm = std::sqrt(detail::dot(v, v));
            for (double& e : v) e /= norm;
        }
        detail::canonical_sign(v);
        components.push_back(std::move(v));
        variances.push_back(lambda / static_cast<double>(n - 1));
    }
    return IntrinsicMap(std::vector<double>(mean.data(), mean.data() + mean.size()), std::move(components),
                        std::move(variances));
}

/// Fits on averaged key portions. Inputs are put in label order first, so the
/// map does not depend on the order they were supplied in.
inline IntrinsicMap fit_map(std::span<const KeyPortion> averages, std::size_t d) {
    std::vector<const KeyPortion*> order;
    order.reserve(averages.size());
    for (const auto& k : averages) order.push_back(&k);
    std::stable_sort(order.begin(), order.end(), [](const KeyPortion* a, const KeyPortion* b) {
        const auto la = format_label(a->label()), lb = format_label(b->label());
        return la != lb ? la < lb : a->sample_id() < b->sample_id();
    });
    std::vector<std::vector<double>> rows;
    rows.reserve(order.size());
    for (const KeyPortion* k : order) rows.emplace_back(k->values().begin(), k->values().end());
    return fit_map(std::span<const std::vector<double>>(rows), d);
}

/// Coordinates of `values` along each component, after removing the mean.
inline std::vector<double> project(const IntrinsicMap& map, std::span<const double> values) {
    if (values.size() != map.input_dim())
        throw usage_error("projection input has " + std::to_string(values.size()) + " values, map expects " +
                          std::to_string(map.input_dim()));
    std::vector<double> centered(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) centered[k] = values[k] - map.mean()[k];
    std::vector<double> coords(map.d());
    for (std::size_t i = 0; i < map.d(); ++i) coords[i] = detail::dot(centered, map.component(i));
    return coords;
}

inline IntrinsicIrisCode project(const IntrinsicMap& map, const KeyPortion& key) {
    return IntrinsicIrisCode(project(map, key.values()), key.label());
}

}  // namespace iic
