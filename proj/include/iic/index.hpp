#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "iic/embed.hpp"
#include "iic/error.hpp"
#include "iic/map_codec.hpp"
#include "iic/model.hpp"
#include "iic/parallel.hpp"

namespace iic {

struct Enrollment {
    EyeLabel label;
    std::vector<double> coords;
};

/// Enrolled codes, sorted by formatted label, tagged with the fingerprint of
/// the map that produced them.
class EnrollmentDB {
public:
    EnrollmentDB(std::vector<Enrollment> entries, std::uint64_t map_fingerprint)
        : entries_(std::move(entries)), fingerprint_(map_fingerprint) {
        if (entries_.empty()) throw usage_error("enrollment database is empty");
        d_ = entries_.front().coords.size();
        if (d_ == 0) throw usage_error("enrolled codes need at least one coordinate");
        names_.reserve(entries_.size());
        for (const auto& e : entries_) names_.push_back(format_label(e.label));
        std::vector<std::size_t> order(entries_.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return names_[a] < names_[b]; });
        std::vector<Enrollment> sorted;
        std::vector<std::string> sorted_names;
        sorted.reserve(order.size());
        sorted_names.reserve(order.size());
        for (std::size_t i : order) {
            if (!sorted_names.empty() && sorted_names.back() == names_[i])
                throw Error(ErrorCategory::Data, "duplicate-label", "label " + names_[i] + " enrolled twice");
            if (entries_[i].coords.size() != d_)
                throw format_error("entry " + names_[i] + " has " + std::to_string(entries_[i].coords.size()) +
                                   " coordinates, expected " + std::to_string(d_));
            for (double c : entries_[i].coords) {
                if (!std::isfinite(c)) throw format_error("entry " + names_[i] + " has a non-finite coordinate");
            }
            sorted.push_back(std::move(entries_[i]));
            sorted_names.push_back(std::move(names_[i]));
        }
        entries_ = std::move(sorted);
        names_ = std::move(sorted_names);
    }

    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t d() const noexcept { return d_; }
    std::uint64_t map_fingerprint() const noexcept { return fingerprint_; }
    const Enrollment& entry(std::size_t i) const { return entries_.at(i); }
    std::span<const Enrollment> entries() const noexcept { return entries_; }
    const std::string& name(std::size_t i) const { return names_.at(i); }

    /// Position of `label` in label order, or size() if absent.
    std::size_t find(const EyeLabel& label) const {
        const std::string key = format_label(label);
        const auto it = std::lower_bound(names_.begin(), names_.end(), key);
        return (it != names_.end() && *it == key) ? static_cast<std::size_t>(it - names_.begin()) : size();
    }

private:
    std::vector<Enrollment> entries_;
    std::vector<std::string> names_;
    std::size_t d_ = 0;
    std::uint64_t fingerprint_ = 0;
};

inline EnrollmentDB enroll(const IntrinsicMap& map, std::span<const KeyPortion> averages) {
    std::vector<Enrollment> entries;
    entries.reserve(averages.size());
    for (const auto& key : averages) entries.push_back({key.label(), project(map, key.values())});
    return EnrollmentDB(std::move(entries), map.input_dim() == kKeySize ? map_fingerprint(map) : 0);
}

struct Candidate {
    std::size_t entry = 0;  // index into the database
    double distance = 0.0;
};

namespace detail {

inline double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        s += diff * diff;
    }
    return std::sqrt(s);
}

inline void check_query_dim(const EnrollmentDB& db, std::span<const double> coords) {
    if (coords.size() != db.d())
        throw usage_error("query has " + std::to_string(coords.size()) + " coordinates, database has " +
                          std::to_string(db.d()));
}

}  // namespace detail

/// All entries ordered by ascending distance, ties by formatted label.
inline std::vector<Candidate> ranked_candidates(const EnrollmentDB& db, std::span<const double> coords) {
    detail::check_query_dim(db, coords);
    std::vector<Candidate> out(db.size());
    for (std::size_t i = 0; i < db.size(); ++i) out[i] = {i, detail::euclidean(coords, db.entry(i).coords)};
    // Entries are stored in label order, so index order is label order.
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.entry < b.entry;
    });
    return out;
}

/// 1-based position of the query's own eye in the ranked candidate list.
/// Counts the entries that sort strictly before it, which gives the same
/// answer as sorting without paying for the sort.
inline std::size_t query_rank(const EnrollmentDB& db, const IntrinsicIrisCode& query) {
    detail::check_query_dim(db, query.coords());
    const std::size_t own = db.find(query.label());
    if (own == db.size()) throw unknown_label_error("label " + format_label(query.label()) + " is not enrolled");
    const double own_dist = detail::euclidean(query.coords(), db.entry(own).coords);
    std::size_t ahead = 0;
    for (std::size_t i = 0; i < db.size(); ++i) {
        const double dist = detail::euclidean(query.coords(), db.entry(i).coords);
        if (dist < own_dist || (dist == own_dist && i < own)) ++ahead;
    }
    return ahead + 1;
}

/// Yields the ranked candidates in batches of increasing distance: the
/// growing neighbourhood a practical search would visit.
class ExpandingSearch {
public:
    ExpandingSearch(const EnrollmentDB& db, std::span<const double> coords, std::size_t batch)
        : batch_(batch) {
        if (batch_ < 1) throw usage_error("search batch must be >= 1");
        ranked_ = ranked_candidates(db, coords);
    }

    bool done() const noexcept { return next_ >= ranked_.size(); }

    std::vector<Candidate> next_batch() {
        const std::size_t end = std::min(next_ + batch_, ranked_.size());
        std::vector<Candidate> out(ranked_.begin() + static_cast<std::ptrdiff_t>(next_),
                                   ranked_.begin() + static_cast<std::ptrdiff_t>(end));
        next_ = end;
        return out;
    }

private:
    std::size_t batch_;
    std::vector<Candidate> ranked_;
    std::size_t next_ = 0;
};

inline ExpandingSearch expanding_search(const EnrollmentDB& db, std::span<const double> coords, std::size_t batch) {
    return ExpandingSearch(db, coords, batch);
}

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

struct PenetrationResult {
    double rate = 0.0;                 // P
    std::vector<std::size_t> ranks;    // C_i
    std::vector<double> samples;       // C_i / N
    std::size_t n_queries = 0;         // Q
    std::size_t n_enrolled = 0;        // N
    std::vector<HistogramBin> histogram;
};

inline constexpr std::size_t kDefaultHistogramBins = 100;

/// Equal-width bins over [0,1]; the last bin is closed on the right.
inline std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t n_bins) {
    if (n_bins < 1) throw usage_error("histogram needs at least one bin");
    std::vector<HistogramBin> bins(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].lo = static_cast<double>(b) / static_cast<double>(n_bins);
        bins[b].hi = static_cast<double>(b + 1) / static_cast<double>(n_bins);
    }
    for (double v : values) {
        const auto b = static_cast<std::size_t>(std::clamp(v, 0.0, 1.0) * static_cast<double>(n_bins));
        ++bins[std::min(b, n_bins - 1)].count;
    }
    return bins;
}

/// Mean fraction of the database examined before each query's own eye turns up.
inline PenetrationResult penetration(const EnrollmentDB& db, std::span<const IntrinsicIrisCode> queries,
                                     std::size_t n_bins = kDefaultHistogramBins, unsigned threads = 1) {
    if (queries.empty()) throw usage_error("penetration needs at least one query");
    PenetrationResult result;
    result.n_queries = queries.size();
    result.n_enrolled = db.size();
    result.ranks.resize(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) { result.ranks[i] = query_rank(db, queries[i]); });

    const double n = static_cast<double>(db.size());
    std::uint64_t total = 0;
    result.samples.reserve(queries.size());
    for (std::size_t c : result.ranks) {
        total += c;
        result.samples.push_back(static_cast<double>(c) / n);
    }
    // Integer sum then one division: exact whenever Q*N is representable.
    result.rate = static_cast<double>(total) / (static_cast<double>(queries.size()) * n);
    result.histogram = histogram(result.samples, n_bins);
    return result;
}

struct SweepRow {
    std::size_t d = 0;
    double rate = 0.0;
};

/// For each d: fit on the averages, enroll them, and score every sample.
inline std::vector<SweepRow> dimension_sweep(std::span<const KeyPortion> averages, std::span<const KeyPortion> samples,
                                             std::span<const std::size_t> dims, unsigned threads = 1) {
    if (dims.empty()) throw usage_error("dimension sweep needs at least one dimension");
    std::vector<SweepRow> rows;
    rows.reserve(dims.size());
    for (std::size_t d : dims) {
        const IntrinsicMap map = fit_map(averages, d);
        const EnrollmentDB db = enroll(map, averages);
        std::vector<IntrinsicIrisCode> queries;
        queries.reserve(samples.size());
        for (const auto& s : samples) queries.push_back(project(map, s));
        rows.push_back({d, penetration(db, queries, kDefaultHistogramBins, threads).rate});
    }
    return rows;
}

}  // namespace iic
