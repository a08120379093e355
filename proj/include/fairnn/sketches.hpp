#pragma once

// Randomized building blocks used by the samplers:
//  - DistinctSketch: mergeable BJKST count-distinct sketch.
//  - WeightedTree: sum tree for weighted sampling with O(log t) updates.
//  - estimate_subset_fraction: sequential-sampling size estimate of a
//    subset given only a membership oracle.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairnn/random.hpp"

namespace fairnn {

class SketchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SketchParams {
    std::size_t rows = 5;       ///< Delta: independent hash rows; the estimate is their median.
    std::size_t capacity = 96;  ///< t: smallest distinct hashes kept per row.
    std::uint64_t seed = 0;

    /// rows = ceil(ln(1/fail)) rounded up to odd, capacity = ceil(24/eps^2).
    static SketchParams for_accuracy(double eps, double fail, std::uint64_t seed) {
        SketchParams p;
        auto rows = static_cast<std::size_t>(std::ceil(std::log(1.0 / fail)));
        rows = std::max<std::size_t>(rows, 1);
        if (rows % 2 == 0) ++rows;
        p.rows = rows;
        p.capacity = static_cast<std::size_t>(std::ceil(24.0 / (eps * eps)));
        p.seed = seed;
        return p;
    }

    bool operator==(const SketchParams&) const = default;
};

/// Strongly universal multiply-shift hash from 64-bit keys to 64-bit
/// values: h(x) = ((a * x + b) mod 2^128) >> 64.
class MultiplyShiftHash {
public:
    MultiplyShiftHash() = default;
    explicit MultiplyShiftHash(Rng& rng) {
        a_ = (static_cast<unsigned __int128>(rng()) << 64) | rng();
        b_ = (static_cast<unsigned __int128>(rng()) << 64) | rng();
    }
    std::uint64_t operator()(std::uint64_t x) const {
        return static_cast<std::uint64_t>((a_ * x + b_) >> 64);
    }
    bool operator==(const MultiplyShiftHash&) const = default;

private:
    unsigned __int128 a_ = 1;
    unsigned __int128 b_ = 0;
};

/// BJKST distinct-elements sketch. Each row keeps the `capacity` smallest
/// distinct hash values of the inserted stream under its own hash; rows
/// that never filled up give the exact distinct count.
class DistinctSketch {
public:
    DistinctSketch() = default;

    explicit DistinctSketch(const SketchParams& params) : params_(params), rows_(params.rows) {
        if (params.rows == 0 || params.capacity == 0) {
            throw SketchError("sketch needs at least one row and positive capacity");
        }
        Rng rng(derive_seed(params.seed, 0x5ce7c4));
        hashers_.reserve(params.rows);
        for (std::size_t w = 0; w < params.rows; ++w) hashers_.emplace_back(rng);
    }

    const SketchParams& params() const { return params_; }
    std::span<const std::uint64_t> row(std::size_t w) const { return rows_[w]; }

    void insert(std::uint64_t x) {
        for (std::size_t w = 0; w < rows_.size(); ++w) offer(rows_[w], hashers_[w](x));
    }

    void merge_from(const DistinctSketch& other) {
        if (!(params_ == other.params_)) {
            throw SketchError("cannot merge sketches with different parameters or seeds");
        }
        for (std::size_t w = 0; w < rows_.size(); ++w) {
            std::vector<std::uint64_t> merged;
            merged.reserve(rows_[w].size() + other.rows_[w].size());
            std::set_union(rows_[w].begin(), rows_[w].end(), other.rows_[w].begin(),
                           other.rows_[w].end(), std::back_inserter(merged));
            if (merged.size() > params_.capacity) merged.resize(params_.capacity);
            rows_[w] = std::move(merged);
        }
    }

    /// Median over rows of capacity * 2^64 / v_t, where v_t is the largest
    /// kept value; a row below capacity contributes its exact size.
    double estimate() const {
        std::vector<double> per_row;
        per_row.reserve(rows_.size());
        const double range = 18446744073709551616.0;  // 2^64
        for (const auto& r : rows_) {
            if (r.size() < params_.capacity) {
                per_row.push_back(static_cast<double>(r.size()));
            } else {
                const double vt = static_cast<double>(r.back()) + 1.0;
                per_row.push_back(static_cast<double>(params_.capacity) * range / vt);
            }
        }
        if (per_row.empty()) return 0.0;
        auto mid = per_row.begin() + static_cast<std::ptrdiff_t>(per_row.size() / 2);
        std::nth_element(per_row.begin(), mid, per_row.end());
        return *mid;
    }

    bool empty() const {
        return rows_.empty() || rows_.front().empty();
    }

    bool operator==(const DistinctSketch& o) const {
        return params_ == o.params_ && rows_ == o.rows_;
    }

private:
    void offer(std::vector<std::uint64_t>& r, std::uint64_t v) const {
        if (r.size() == params_.capacity && v >= r.back()) return;
        auto it = std::lower_bound(r.begin(), r.end(), v);
        if (it != r.end() && *it == v) return;
        r.insert(it, v);
        if (r.size() > params_.capacity) r.pop_back();
    }

    SketchParams params_;
    std::vector<MultiplyShiftHash> hashers_;
    std::vector<std::vector<std::uint64_t>> rows_;
};

inline DistinctSketch merge(const DistinctSketch& a, const DistinctSketch& b) {
    DistinctSketch out = a;
    out.merge_from(b);
    return out;
}

/// Complete binary sum tree over a fixed number of non-negative weights.
class WeightedTree {
public:
    WeightedTree() = default;

    explicit WeightedTree(std::span<const double> weights) { assign(weights); }

    void assign(std::span<const double> weights) {
        count_ = weights.size();
        leaves_ = std::bit_ceil(std::max<std::size_t>(count_, 1));
        nodes_.assign(2 * leaves_, 0.0);
        for (std::size_t i = 0; i < count_; ++i) {
            if (!(weights[i] >= 0.0)) throw SamplingError("weights must be non-negative");
            nodes_[leaves_ + i] = weights[i];
        }
        for (std::size_t u = leaves_ - 1; u >= 1; --u) nodes_[u] = nodes_[2 * u] + nodes_[2 * u + 1];
    }

    std::size_t size() const { return count_; }
    double total() const { return nodes_.empty() ? 0.0 : nodes_[1]; }
    double weight(std::size_t i) const { return nodes_[leaves_ + i]; }

    void update(std::size_t i, double w) {
        if (i >= count_) {
            throw std::out_of_range("weighted tree index " + std::to_string(i) + " out of range");
        }
        if (!(w >= 0.0)) throw SamplingError("weights must be non-negative");
        std::size_t u = leaves_ + i;
        nodes_[u] = w;
        for (u /= 2; u >= 1; u /= 2) nodes_[u] = nodes_[2 * u] + nodes_[2 * u + 1];
    }

    /// Root-to-leaf descent: at node u go left with probability
    /// w(left) / w(u).
    template <class Gen>
    std::size_t sample(Gen& gen) const {
        if (!(total() > 0.0)) throw SamplingError("cannot sample from all-zero weights");
        std::size_t u = 1;
        while (u < leaves_) {
            const double l = nodes_[2 * u];
            const double r = nodes_[2 * u + 1];
            if (r <= 0.0) {
                u = 2 * u;
            } else if (l <= 0.0) {
                u = 2 * u + 1;
            } else {
                u = uniform_unit(gen) * (l + r) < l ? 2 * u : 2 * u + 1;
            }
        }
        return u - leaves_;
    }

    bool is_consistent() const {
        for (std::size_t u = 1; u < leaves_; ++u) {
            if (nodes_[u] != nodes_[2 * u] + nodes_[2 * u + 1]) return false;
        }
        return true;
    }

private:
    std::size_t count_ = 0;
    std::size_t leaves_ = 1;
    std::vector<double> nodes_{0.0, 0.0};
};

struct SubsetEstimate {
    double value = 0.0;
    std::size_t probes = 0;
    std::size_t hits = 0;
};

/// Hits the sequential estimator waits for: ceil(4 ln(2/fail) / eps^2).
inline std::size_t subset_estimate_hits(double eps, double fail) {
    return static_cast<std::size_t>(std::ceil(4.0 * std::log(2.0 / fail) / (eps * eps)));
}

/// Estimates |B| for B subset of [0, universe) by probing uniform indices
/// with replacement until `subset_estimate_hits` members are seen; returns
/// universe * hits / probes. Throws once the probe cap
/// 64 * universe * ln(1/fail) / eps^2 is spent.
template <class Pred, class Gen>
SubsetEstimate estimate_subset_fraction(std::size_t universe, Pred&& member, double eps,
                                        double fail, Gen& gen) {
    if (universe == 0) throw SamplingError("empty universe");
    const std::size_t target = std::max<std::size_t>(subset_estimate_hits(eps, fail), 1);
    const double cap_d =
        64.0 * static_cast<double>(universe) * std::max(std::log(1.0 / fail), 1.0) / (eps * eps);
    const auto cap = static_cast<std::size_t>(std::ceil(cap_d));
    SubsetEstimate est;
    while (est.hits < target) {
        if (est.probes >= cap) {
            throw SamplingError("subset estimation exceeded its probe budget of " +
                                std::to_string(cap));
        }
        ++est.probes;
        if (member(static_cast<std::size_t>(uniform_index(gen, universe)))) ++est.hits;
    }
    est.value = static_cast<double>(universe) * static_cast<double>(est.hits) /
                static_cast<double>(est.probes);
    return est;
}

}  // namespace fairnn
