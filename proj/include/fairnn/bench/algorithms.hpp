#pragma once

// Query-time sampling strategies over the L buckets retrieved for a
// query. All of them skip points outside the near ball; they differ in
// how buckets and points are weighted.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairnn/random.hpp"
#include "fairnn/set_family.hpp"
#include "fairnn/union_sampling.hpp"

namespace fairnn::bench {

enum class Algorithm {
    UniformUniform,   ///< uniform bucket, uniform point
    WeightedUniform,  ///< bucket by size, uniform point
    Optimal,          ///< bucket by size, reject with 1 - 1/degree
    DegreeApprox,     ///< as Optimal with a probed degree estimate L/i
    RankPerturb,      ///< min rank over the buckets, then perturb
    Naive,            ///< collect, filter, choose uniformly
    FairNNIS,         ///< segment sampler over all replicas
    LsfFair,          ///< filter index rejection sampler (unit vectors)
};

inline const std::vector<Algorithm>& all_algorithms() {
    static const std::vector<Algorithm> v = {Algorithm::UniformUniform, Algorithm::WeightedUniform,
                                             Algorithm::Optimal,        Algorithm::DegreeApprox,
                                             Algorithm::RankPerturb,    Algorithm::Naive,
                                             Algorithm::FairNNIS,       Algorithm::LsfFair};
    return v;
}

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::UniformUniform: return "uniform-uniform";
        case Algorithm::WeightedUniform: return "weighted-uniform";
        case Algorithm::Optimal: return "optimal";
        case Algorithm::DegreeApprox: return "degree-approx";
        case Algorithm::RankPerturb: return "rank-perturb";
        case Algorithm::Naive: return "naive";
        case Algorithm::FairNNIS: return "fair-nnis";
        case Algorithm::LsfFair: return "lsf-fair";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    for (Algorithm a : all_algorithms()) {
        if (to_string(a) == s) return a;
    }
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

/// Algorithms that change index state and need exclusive access.
inline bool mutates_index(Algorithm a) { return a == Algorithm::RankPerturb || a == Algorithm::LsfFair; }

/// The buckets of one query: `slots` are the non-empty ones among
/// `tables` tables; `far` flags points outside the near ball.
struct BucketQuery {
    const RankedFamily* family = nullptr;
    std::vector<SetId> slots;
    std::size_t tables = 0;
    OutlierOracle far;

    bool is_far(ElementId x) const { return far && far(x); }
    std::size_t mass() const {
        std::size_t m = 0;
        for (SetId s : slots) m += family->set_size(s);
        return m;
    }
    std::size_t degree(ElementId x) const {
        std::size_t d = 0;
        for (SetId s : slots) d += family->contains(s, x);
        return d;
    }
};

struct Draw {
    std::optional<ElementId> point;
    std::size_t rounds = 0;
    bool capped = false;  ///< gave up after the retry cap
};

inline std::size_t default_retry_cap(const BucketQuery& q) {
    return std::max<std::size_t>(10000, 64 * (q.tables + q.mass()));
}

namespace detail {

inline std::vector<std::size_t> slot_sizes(const BucketQuery& q) {
    std::vector<std::size_t> s;
    for (SetId b : q.slots) s.push_back(q.family->set_size(b));
    return s;
}

// Bucket by size and uniform point, far points removed as they are met;
// `accept` decides whether a near point is reported.
template <class Gen, class Accept>
Draw weighted_loop(const BucketQuery& q, Gen& gen, std::size_t cap, Accept&& accept) {
    Draw d;
    if (q.slots.empty()) return d;
    ActivePrefixOverlay overlay(slot_sizes(q));
    if (!cap) cap = default_retry_cap(q);
    while (overlay.total() > 0.0) {
        if (d.rounds >= cap) {
            d.capped = true;
            return d;
        }
        ++d.rounds;
        const auto pick = overlay.sample(gen);
        const ElementId x = q.family->element_at_position(q.slots[pick.slot], pick.index);
        if (q.is_far(x)) {
            overlay.remove(pick.slot, pick.pos);
            continue;
        }
        if (accept(x)) {
            d.point = x;
            return d;
        }
    }
    return d;
}

}  // namespace detail

/// Uniform table among all L (empty ones included), uniform point; far
/// points are removed and the draw repeats until a near point turns up or
/// the cap is hit.
template <class Gen>
Draw uniform_uniform(const BucketQuery& q, Gen& gen, std::size_t cap = 0) {
    Draw d;
    if (q.slots.empty() || q.tables == 0) return d;
    ActivePrefixOverlay overlay(detail::slot_sizes(q));
    if (!cap) cap = default_retry_cap(q);
    while (overlay.total() > 0.0) {
        if (d.rounds >= cap) {
            d.capped = true;
            return d;
        }
        ++d.rounds;
        const std::size_t t = uniform_index(gen, q.tables);
        if (t >= q.slots.size() || overlay.active(t) == 0) continue;
        const std::size_t pos = uniform_index(gen, overlay.active(t));
        const ElementId x = q.family->element_at_position(q.slots[t], overlay.at(t, pos));
        if (q.is_far(x)) {
            overlay.remove(t, pos);
            continue;
        }
        d.point = x;
        return d;
    }
    return d;
}

template <class Gen>
Draw weighted_uniform(const BucketQuery& q, Gen& gen, std::size_t cap = 0) {
    return detail::weighted_loop(q, gen, cap, [](ElementId) { return true; });
}

/// Accepts a near point with probability 1 / (exact degree).
template <class Gen>
Draw optimal(const BucketQuery& q, Gen& gen, std::size_t cap = 0) {
    return detail::weighted_loop(q, gen, cap, [&](ElementId x) {
        return uniform_index(gen, q.degree(x)) == 0;
    });
}

/// Degree estimate: probe uniform tables with replacement until one holds
/// x; first hit at probe i gives L / i, floored at 1.
template <class Gen>
double probe_degree_estimate(const BucketQuery& q, ElementId x, Gen& gen) {
    for (std::size_t i = 1;; ++i) {
        const std::size_t t = uniform_index(gen, q.tables);
        if (t < q.slots.size() && q.family->contains(q.slots[t], x)) {
            return std::max(1.0, static_cast<double>(q.tables) / static_cast<double>(i));
        }
    }
}

template <class Gen>
Draw degree_approx(const BucketQuery& q, Gen& gen, std::size_t cap = 0) {
    return detail::weighted_loop(q, gen, cap, [&](ElementId x) {
        return bernoulli(gen, 1.0 / probe_degree_estimate(q, x, gen));
    });
}

/// Min-rank near point over the buckets, then its rank is perturbed.
inline Draw rank_perturb(RankedFamily& family, const BucketQuery& q) {
    Draw d;
    SubFamilyQuery sq;
    sq.set_ids = q.slots;
    sq.outlier = q.far;
    const SampleOutcome o = sample_perturb_outliers(family, sq);
    d.rounds = o.rounds;
    if (o.has_element()) d.point = o.element;
    return d;
}

/// Collect every colliding point, keep the near ones, choose uniformly.
template <class Gen>
Draw naive(const BucketQuery& q, Gen& gen) {
    Draw d;
    std::vector<ElementId> all;
    for (SetId s : q.slots) {
        for (std::size_t i = 0; i < q.family->set_size(s); ++i) all.push_back(q.family->element_at_position(s, i));
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    std::vector<ElementId> near;
    for (ElementId x : all) {
        if (!q.is_far(x)) near.push_back(x);
    }
    d.rounds = 1;
    if (!near.empty()) d.point = near[uniform_index(gen, near.size())];
    return d;
}

}  // namespace fairnn::bench
