#pragma once

// Samplers that draw an element from the union of a sub-family F' of a
// RankedFamily, optionally skipping outliers.
//
// Every independent sampler takes the query stream explicitly. The
// dependent samplers read the family's rank permutation; the perturbing
// variants also draw from the family's own perturbation stream.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fairnn/random.hpp"
#include "fairnn/set_family.hpp"
#include "fairnn/sketches.hpp"

namespace fairnn {

/// The bad event of the segment samplers: a segment held more union
/// members than the bound lambda.
class FailureEvent : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SampleStatus { Element, None, BudgetExceeded };

struct SampleOutcome {
    SampleStatus status = SampleStatus::None;
    ElementId element = 0;
    std::size_t rounds = 0;
    std::size_t probes = 0;
    std::size_t outliers_seen = 0;

    bool has_element() const { return status == SampleStatus::Element; }
};

using OutlierOracle = std::function<bool(ElementId)>;

struct SubFamilyQuery {
    std::vector<SetId> set_ids;
    OutlierOracle outlier;                     ///< empty: no outliers
    std::optional<std::size_t> outlier_budget; ///< omega

    bool is_outlier(ElementId x) const { return outlier && outlier(x); }
};

enum class SamplerKind {
    DependentMinRank,
    RankPerturb,
    ExactDegree,
    ApproxDegree,
    SimulationDegree,
    RankSegment,
    RankSegmentOutliers,
};

struct SamplerConfig {
    double c_lambda = 4.0;          ///< lambda = c_lambda * lg n
    double c_sigma = 16.0;          ///< Sigma = c_sigma * lg^2 n
    std::size_t forced_k = 0;       ///< segment count override (power of two), 0 = from sketches
    std::size_t forced_lambda = 0;  ///< lambda override, 0 = from c_lambda
    std::size_t round_cap = 0;      ///< rejection-loop tripwire, 0 = automatic
    double degree_fail = 0.25;      ///< failure probability handed to the degree estimator
};

/// lg n as used by the segment samplers: max(3, ceil(log2 n)).
inline std::size_t segment_log(std::size_t n) {
    std::size_t lg = 0;
    while ((std::size_t{1} << lg) < n) ++lg;
    return std::max<std::size_t>(lg, 3);
}

inline std::size_t segment_lambda(std::size_t n, const SamplerConfig& cfg) {
    if (cfg.forced_lambda) return cfg.forced_lambda;
    return static_cast<std::size_t>(std::ceil(cfg.c_lambda * static_cast<double>(segment_log(n))));
}

inline std::size_t segment_sigma(std::size_t n, const SamplerConfig& cfg) {
    const double lg = static_cast<double>(segment_log(n));
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.c_sigma * lg * lg)));
}

/// Segment h of k over ranks [0, n): [floor(h n / k), floor((h+1) n / k)).
inline std::pair<Rank, Rank> segment_bounds(std::size_t n, std::size_t k, std::size_t h) {
    const auto lo = static_cast<Rank>((static_cast<unsigned __int128>(h) * n) / k);
    const auto hi = static_cast<Rank>((static_cast<unsigned __int128>(h + 1) * n) / k);
    return {lo, hi};
}

namespace detail {

inline void validate_query(const RankedFamily& family, const SubFamilyQuery& q) {
    std::unordered_set<SetId> seen;
    for (SetId s : q.set_ids) {
        if (s >= family.num_sets()) {
            throw FamilyError("query set id " + std::to_string(s) + " out of range");
        }
        if (!seen.insert(s).second) {
            throw FamilyError("query set id " + std::to_string(s) + " repeated");
        }
    }
}

inline std::size_t query_mass(const RankedFamily& family, const SubFamilyQuery& q) {
    std::size_t m = 0;
    for (SetId s : q.set_ids) m += family.set_size(s);
    return m;
}

inline std::size_t default_cap(std::size_t expected_bound, std::size_t n) {
    const double lg = static_cast<double>(segment_log(n));
    return std::max<std::size_t>(
        10000, static_cast<std::size_t>(64.0 * static_cast<double>(expected_bound) * lg));
}

inline WeightedTree size_tree(const RankedFamily& family, const SubFamilyQuery& q) {
    std::vector<double> w;
    w.reserve(q.set_ids.size());
    for (SetId s : q.set_ids) w.push_back(static_cast<double>(family.set_size(s)));
    return WeightedTree(w);
}

struct Cursor {
    Rank rank;
    std::size_t slot;  // index into query.set_ids
    std::size_t pos;
    bool operator>(const Cursor& o) const { return rank > o.rank; }
};

// Min-rank scan over per-set cursors, skipping outliers.
inline SampleOutcome min_rank_inlier(const RankedFamily& family, const SubFamilyQuery& q) {
    SampleOutcome out;
    std::priority_queue<Cursor, std::vector<Cursor>, std::greater<>> pq;
    for (std::size_t i = 0; i < q.set_ids.size(); ++i) {
        auto r = family.ranks(q.set_ids[i]);
        if (!r.empty()) pq.push({r[0], i, 0});
    }
    while (!pq.empty()) {
        const Cursor c = pq.top();
        pq.pop();
        ++out.rounds;
        const ElementId x = family.ground().element_at(c.rank);
        if (!q.is_outlier(x)) {
            out.status = SampleStatus::Element;
            out.element = x;
            out.probes = out.rounds;
            return out;
        }
        ++out.outliers_seen;
        auto r = family.ranks(q.set_ids[c.slot]);
        if (c.pos + 1 < r.size()) pq.push({r[c.pos + 1], c.slot, c.pos + 1});
    }
    out.probes = out.rounds;
    return out;
}

inline void perturb(RankedFamily& family, ElementId x) {
    const std::size_t n = family.num_elements();
    const Rank rx = family.rank_of(x);
    const auto r = static_cast<Rank>(rx + uniform_index(family.perturbation_rng(), n - rx));
    family.swap_ranks(x, family.ground().element_at(r));
}

}  // namespace detail

/// Returns the minimum-rank element of the union; repeated calls with the
/// same query return the same element.
inline SampleOutcome sample_dependent(const RankedFamily& family, const SubFamilyQuery& query) {
    detail::validate_query(family, query);
    SampleOutcome out;
    Rank best = 0;
    bool found = false;
    for (SetId s : query.set_ids) {
        ++out.probes;
        auto r = family.ranks(s);
        if (!r.empty() && (!found || r[0] < best)) {
            best = r[0];
            found = true;
        }
    }
    out.rounds = 1;
    if (found) {
        out.status = SampleStatus::Element;
        out.element = family.ground().element_at(best);
    }
    return out;
}

/// sample_dependent followed by swapping the winner's rank with a uniform
/// rank in [rank(x), n).
inline SampleOutcome sample_dependent_perturb(RankedFamily& family, const SubFamilyQuery& query) {
    SampleOutcome out = sample_dependent(family, query);
    if (out.has_element()) detail::perturb(family, out.element);
    return out;
}

inline SampleOutcome sample_dependent_outliers(const RankedFamily& family,
                                               const SubFamilyQuery& query) {
    detail::validate_query(family, query);
    return detail::min_rank_inlier(family, query);
}

inline SampleOutcome sample_perturb_outliers(RankedFamily& family, const SubFamilyQuery& query) {
    SampleOutcome out = sample_dependent_outliers(family, query);
    if (out.has_element()) detail::perturb(family, out.element);
    return out;
}

/// Number of query sets containing x (g membership probes).
inline std::size_t query_degree(const RankedFamily& family, const SubFamilyQuery& query,
                                ElementId x) {
    std::size_t d = 0;
    for (SetId s : query.set_ids) d += family.contains(s, x) ? 1 : 0;
    return d;
}

namespace detail {

// Shared rejection loop of the degree-based samplers: pick a set with
// probability |A| / m, a uniform member x of it, then `accept(x, out)`.
template <class Gen, class Accept>
SampleOutcome degree_rejection(const RankedFamily& family, const SubFamilyQuery& query,
                               std::size_t cap, Gen& gen, Accept&& accept) {
    validate_query(family, query);
    SampleOutcome out;
    if (query_mass(family, query) == 0) return out;
    const WeightedTree tree = size_tree(family, query);
    while (true) {
        if (out.rounds >= cap) {
            throw SamplingError("rejection sampler exceeded its round cap of " + std::to_string(cap));
        }
        ++out.rounds;
        const SetId s = query.set_ids[tree.sample(gen)];
        const ElementId x = family.element_at_position(s, uniform_index(gen, family.set_size(s)));
        if (accept(x, out)) {
            out.status = SampleStatus::Element;
            out.element = x;
            return out;
        }
    }
}

}  // namespace detail

/// Exactly uniform: accept a set-weighted draw x with probability 1/d(x).
template <class Gen>
SampleOutcome sample_exact_degree(const RankedFamily& family, const SubFamilyQuery& query,
                                  Gen& gen, const SamplerConfig& cfg = {}) {
    const std::size_t cap =
        cfg.round_cap ? cfg.round_cap
                      : detail::default_cap(detail::query_mass(family, query), family.num_elements());
    return detail::degree_rejection(family, query, cap, gen, [&](ElementId x, SampleOutcome& out) {
        const std::size_t d = query_degree(family, query, x);
        out.probes += query.set_ids.size();
        return bernoulli(gen, 1.0 / static_cast<double>(d));
    });
}

/// As sample_exact_degree, but d(x) comes from estimate_subset_fraction
/// over the g query sets. Accepting with probability g H / T (T probes for
/// H hits) is an unbiased 1/d(x) whenever it does not exceed one.
template <class Gen>
SampleOutcome sample_approx_degree(const RankedFamily& family, const SubFamilyQuery& query,
                                   double eps, Gen& gen, const SamplerConfig& cfg = {}) {
    if (!(eps > 0.0 && eps < 1.0)) throw SamplingError("eps must lie in (0, 1)");
    const std::size_t cap =
        cfg.round_cap ? cfg.round_cap
                      : detail::default_cap(detail::query_mass(family, query), family.num_elements());
    const std::size_t g = query.set_ids.size();
    return detail::degree_rejection(family, query, cap, gen, [&](ElementId x, SampleOutcome& out) {
        const auto member = [&](std::size_t i) { return family.contains(query.set_ids[i], x); };
        const SubsetEstimate est = estimate_subset_fraction(g, member, eps, cfg.degree_fail, gen);
        out.probes += est.probes;
        return bernoulli(gen, 1.0 / est.value);
    });
}

struct UrnResult {
    double value = 0.0;
    bool bit = false;
    std::size_t probes = 0;
};

/// Probes urns uniformly with replacement until the first non-empty one
/// at trial i and returns Y = i / g, so E[Y] = 1/d.
template <class Pred, class Gen>
UrnResult urn_probe_expectation(std::size_t num_urns, Pred&& nonempty, Gen& gen) {
    if (num_urns == 0) throw SamplingError("no urns");
    UrnResult r;
    while (true) {
        ++r.probes;
        if (nonempty(static_cast<std::size_t>(uniform_index(gen, num_urns)))) break;
    }
    r.value = static_cast<double>(r.probes) / static_cast<double>(num_urns);
    return r;
}

/// Delta = ceil(ln(1/fail)) + 4.
inline std::size_t urn_delta(double fail) {
    return static_cast<std::size_t>(std::ceil(std::log(1.0 / fail))) + 4;
}

/// Bit X with Pr[X = 1] in [1/(d Delta) - fail, 1/(d Delta)]: the
/// first-hit trial i is scaled to i / (g Delta); after g Delta + 1 misses
/// the value is 0.
template <class Pred, class Gen>
UrnResult urn_accept_bit(std::size_t num_urns, Pred&& nonempty, double fail, Gen& gen) {
    if (num_urns == 0) throw SamplingError("no urns");
    if (!(fail > 0.0 && fail < 1.0)) throw SamplingError("fail must lie in (0, 1)");
    const std::size_t delta = urn_delta(fail);
    const std::size_t limit = num_urns * delta;
    UrnResult r;
    bool hit = false;
    while (r.probes < limit + 1) {
        ++r.probes;
        if (nonempty(static_cast<std::size_t>(uniform_index(gen, num_urns)))) {
            hit = true;
            break;
        }
    }
    if (hit && r.probes <= limit) {
        r.value = static_cast<double>(r.probes) / static_cast<double>(limit);
    }
    r.bit = bernoulli(gen, r.value);
    return r;
}

/// Failure probability used by the simulation sampler: (eps / (4 g))^2.
inline double simulation_fail(double eps, std::size_t g) {
    const double v = eps / (4.0 * static_cast<double>(std::max<std::size_t>(g, 1)));
    return v * v;
}

/// Degree-free rejection: accept x with urn_accept_bit over the g query
/// sets (urn i non-empty iff x is in set i).
template <class Gen>
SampleOutcome sample_simulation(const RankedFamily& family, const SubFamilyQuery& query,
                                double eps, Gen& gen, const SamplerConfig& cfg = {}) {
    if (!(eps > 0.0 && eps < 1.0)) throw SamplingError("eps must lie in (0, 1)");
    const std::size_t g = query.set_ids.size();
    const double fail = simulation_fail(eps, g);
    const std::size_t cap =
        cfg.round_cap ? cfg.round_cap
                      : detail::default_cap(detail::query_mass(family, query) * urn_delta(fail),
                                            family.num_elements());
    return detail::degree_rejection(family, query, cap, gen, [&](ElementId x, SampleOutcome& out) {
        const auto member = [&](std::size_t i) { return family.contains(query.set_ids[i], x); };
        const UrnResult u = urn_accept_bit(g, member, fail, gen);
        out.probes += u.probes;
        return u.bit;
    });
}

/// Logical deletion over a list of slots (sets or buckets) of given sizes.
/// Each slot behaves like an array whose active prefix shrinks on
/// removal: the removed position takes the value of the last active one.
/// The swaps live in a sparse per-slot map, so the underlying storage is
/// never touched and discarding the overlay restores everything.
class ActivePrefixOverlay {
public:
    explicit ActivePrefixOverlay(std::vector<std::size_t> sizes) : active_(std::move(sizes)) {
        std::vector<double> w(active_.size());
        for (std::size_t i = 0; i < active_.size(); ++i) w[i] = static_cast<double>(active_[i]);
        tree_.assign(w);
        moved_.resize(active_.size());
    }

    std::size_t slots() const { return active_.size(); }
    std::size_t active(std::size_t slot) const { return active_[slot]; }
    double total() const { return tree_.total(); }

    /// Underlying index held at virtual position `pos` of `slot`.
    std::size_t at(std::size_t slot, std::size_t pos) const {
        const auto& m = moved_[slot];
        const auto it = m.find(pos);
        return it == m.end() ? pos : it->second;
    }

    struct Pick {
        std::size_t slot;
        std::size_t pos;    ///< virtual position
        std::size_t index;  ///< underlying index
    };

    /// Slot with probability proportional to its active size, then a
    /// uniform active position.
    template <class Gen>
    Pick sample(Gen& gen) const {
        const std::size_t slot = tree_.sample(gen);
        const std::size_t pos = uniform_index(gen, active_[slot]);
        return {slot, pos, at(slot, pos)};
    }

    void remove(std::size_t slot, std::size_t pos) {
        const std::size_t last = active_[slot] - 1;
        auto& m = moved_[slot];
        if (pos != last) m[pos] = at(slot, last);
        m.erase(last);
        active_[slot] = last;
        tree_.update(slot, static_cast<double>(last));
        ++removed_;
    }

    std::size_t removed() const { return removed_; }

private:
    std::vector<std::size_t> active_;
    std::vector<std::unordered_map<std::size_t, std::size_t>> moved_;
    WeightedTree tree_;
    std::size_t removed_ = 0;
};

/// Simulation sampler that deletes outliers as it meets them: a drawn
/// outlier leaves the active prefix of the set it was drawn from and is
/// counted. More than omega deletions yields BudgetExceeded. Deletions
/// are held in a private overlay, so the family is left untouched.
template <class Gen>
SampleOutcome sample_approx_outliers(const RankedFamily& family, const SubFamilyQuery& query,
                                     double eps, std::size_t omega, Gen& gen,
                                     const SamplerConfig& cfg = {}) {
    detail::validate_query(family, query);
    if (!(eps > 0.0 && eps < 1.0)) throw SamplingError("eps must lie in (0, 1)");
    const std::size_t g = query.set_ids.size();
    SampleOutcome out;
    if (detail::query_mass(family, query) == 0) return out;
    const double fail = simulation_fail(eps, g);
    const std::size_t cap =
        cfg.round_cap ? cfg.round_cap
                      : detail::default_cap(detail::query_mass(family, query) * urn_delta(fail),
                                            family.num_elements()) +
                            omega;

    std::vector<std::size_t> sizes(g);
    for (std::size_t i = 0; i < g; ++i) sizes[i] = family.set_size(query.set_ids[i]);
    ActivePrefixOverlay overlay(std::move(sizes));
    while (overlay.total() > 0.0) {
        if (out.rounds >= cap) {
            throw SamplingError("rejection sampler exceeded its round cap of " + std::to_string(cap));
        }
        ++out.rounds;
        const auto pick = overlay.sample(gen);
        const ElementId x = family.element_at_position(query.set_ids[pick.slot], pick.index);
        if (query.is_outlier(x)) {
            ++out.outliers_seen;
            if (out.outliers_seen > omega) {
                out.status = SampleStatus::BudgetExceeded;
                return out;
            }
            overlay.remove(pick.slot, pick.pos);
            continue;
        }
        const auto member = [&](std::size_t i) { return family.contains(query.set_ids[i], x); };
        const UrnResult u = urn_accept_bit(g, member, fail, gen);
        out.probes += u.probes;
        if (u.bit) {
            out.status = SampleStatus::Element;
            out.element = x;
            return out;
        }
    }
    return out;
}

using SketchLookup = std::function<const DistinctSketch&(SetId)>;

/// One count-distinct sketch per set, keyed by element id.
inline std::vector<DistinctSketch> build_set_sketches(const RankedFamily& family,
                                                      const SketchParams& params) {
    std::vector<DistinctSketch> out;
    out.reserve(family.num_sets());
    for (SetId s = 0; s < family.num_sets(); ++s) {
        DistinctSketch sk(params);
        for (Rank r : family.ranks(s)) sk.insert(family.ground().element_at(r));
        out.push_back(std::move(sk));
    }
    return out;
}

/// Sketch parameters for the segment samplers: eps = 1/2 and failure
/// probability 1/(4 n^2).
inline SketchParams segment_sketch_params(std::size_t n, std::uint64_t seed) {
    const double nn = static_cast<double>(std::max<std::size_t>(n, 2));
    return SketchParams::for_accuracy(0.5, 1.0 / (4.0 * nn * nn), seed);
}

/// Estimate of |union F'| from the merged sketches of the query sets.
inline double merged_union_estimate(const SubFamilyQuery& query, const SketchLookup& sketch) {
    if (query.set_ids.empty()) return 0.0;
    DistinctSketch merged = sketch(query.set_ids.front());
    for (std::size_t i = 1; i < query.set_ids.size(); ++i) merged.merge_from(sketch(query.set_ids[i]));
    return merged.estimate();
}

/// Smallest power of two >= 2 s_hat (at least 2).
inline std::size_t segment_count_for(double s_hat) {
    const auto target = static_cast<std::size_t>(std::ceil(std::max(2.0 * s_hat, 2.0)));
    return std::bit_ceil(target);
}

struct SegmentScan {
    std::vector<ElementId> inliers;  ///< distinct union members in the segment, rank order
    std::size_t outliers = 0;        ///< outlier retrievals (with repeats across sets)
    std::size_t probes = 0;
    bool budget_exceeded = false;
};

/// Collects the distinct inliers of union F' with rank in segment h of k.
inline SegmentScan scan_segment(const RankedFamily& family, const SubFamilyQuery& query,
                                std::size_t k, std::size_t h,
                                std::optional<std::size_t> omega = std::nullopt) {
    SegmentScan scan;
    const auto [lo, hi] = segment_bounds(family.num_elements(), k, h);
    std::vector<Rank> ranks;
    for (SetId s : query.set_ids) {
        const auto [b, e] = family.rank_window(s, lo, hi);
        auto r = family.ranks(s);
        scan.probes += 1 + (e - b);
        for (std::size_t i = b; i < e; ++i) {
            if (query.is_outlier(family.ground().element_at(r[i]))) {
                ++scan.outliers;
                if (omega && scan.outliers > *omega) {
                    scan.budget_exceeded = true;
                    return scan;
                }
            } else {
                ranks.push_back(r[i]);
            }
        }
    }
    std::sort(ranks.begin(), ranks.end());
    ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
    scan.inliers.reserve(ranks.size());
    for (Rank r : ranks) scan.inliers.push_back(family.ground().element_at(r));
    return scan;
}

namespace detail {

inline void check_lambda(std::size_t occupancy, std::size_t lambda, std::size_t h) {
    if (occupancy > lambda) {
        throw FailureEvent("segment " + std::to_string(h) + " holds " + std::to_string(occupancy) +
                           " union members, above lambda = " + std::to_string(lambda));
    }
}

}  // namespace detail

/// Exactly uniform and independent: pick a segment h uniformly, accept
/// with probability lambda_h / lambda, return a uniform member of the
/// segment. Outliers in the query are ignored here.
template <class Gen>
SampleOutcome sample_rank_segment(const RankedFamily& family, const SubFamilyQuery& query,
                                  const SketchLookup& sketch, Gen& gen,
                                  const SamplerConfig& cfg = {}) {
    detail::validate_query(family, query);
    SampleOutcome out;
    const std::size_t n = family.num_elements();
    if (n == 0 || detail::query_mass(family, query) == 0) return out;
    const std::size_t k =
        cfg.forced_k ? cfg.forced_k : segment_count_for(merged_union_estimate(query, sketch));
    const std::size_t lambda = segment_lambda(n, cfg);
    const std::size_t cap = cfg.round_cap ? cfg.round_cap : std::max<std::size_t>(10000, 100 * k * lambda);
    SubFamilyQuery plain{query.set_ids, {}, std::nullopt};
    while (true) {
        if (out.rounds >= cap) {
            throw SamplingError("segment sampler exceeded its round cap of " + std::to_string(cap));
        }
        ++out.rounds;
        const std::size_t h = uniform_index(gen, k);
        const SegmentScan scan = scan_segment(family, plain, k, h);
        out.probes += scan.probes;
        detail::check_lambda(scan.inliers.size(), lambda, h);
        if (bernoulli(gen, static_cast<double>(scan.inliers.size()) / static_cast<double>(lambda))) {
            out.status = SampleStatus::Element;
            out.element = scan.inliers[uniform_index(gen, scan.inliers.size())];
            return out;
        }
    }
}

template <class Gen>
SampleOutcome sample_rank_segment(const RankedFamily& family, const SubFamilyQuery& query,
                                  const std::vector<DistinctSketch>& sketches, Gen& gen,
                                  const SamplerConfig& cfg = {}) {
    return sample_rank_segment(
        family, query, [&](SetId s) -> const DistinctSketch& { return sketches[s]; }, gen, cfg);
}

/// Segment sampler that skips outliers. k starts at the smallest power of
/// two >= 2 s_hat and halves after every Sigma unsuccessful iterations;
/// the result is None once k drops below 2. More than omega outlier
/// retrievals inside one segment scan yields BudgetExceeded.
template <class Gen>
SampleOutcome sample_segment_outliers(const RankedFamily& family, const SubFamilyQuery& query,
                                      const SketchLookup& sketch, std::size_t omega, Gen& gen,
                                      const SamplerConfig& cfg = {}) {
    detail::validate_query(family, query);
    SampleOutcome out;
    const std::size_t n = family.num_elements();
    if (n == 0 || detail::query_mass(family, query) == 0) return out;
    std::size_t k =
        cfg.forced_k ? cfg.forced_k : segment_count_for(merged_union_estimate(query, sketch));
    const std::size_t lambda = segment_lambda(n, cfg);
    const std::size_t sigma = segment_sigma(n, cfg);
    std::size_t sigma_fail = 0;
    while (k >= 2) {
        ++out.rounds;
        const std::size_t h = uniform_index(gen, k);
        const SegmentScan scan = scan_segment(family, query, k, h, omega);
        out.probes += scan.probes;
        out.outliers_seen += scan.outliers;
        if (scan.budget_exceeded) {
            out.status = SampleStatus::BudgetExceeded;
            return out;
        }
        detail::check_lambda(scan.inliers.size(), lambda, h);
        if (bernoulli(gen, static_cast<double>(scan.inliers.size()) / static_cast<double>(lambda))) {
            out.status = SampleStatus::Element;
            out.element = scan.inliers[uniform_index(gen, scan.inliers.size())];
            return out;
        }
        if (++sigma_fail == sigma) {
            k /= 2;
            sigma_fail = 0;
        }
    }
    return out;
}

template <class Gen>
SampleOutcome sample_segment_outliers(const RankedFamily& family, const SubFamilyQuery& query,
                                      const std::vector<DistinctSketch>& sketches,
                                      std::size_t omega, Gen& gen, const SamplerConfig& cfg = {}) {
    return sample_segment_outliers(
        family, query, [&](SetId s) -> const DistinctSketch& { return sketches[s]; }, omega, gen,
        cfg);
}

}  // namespace fairnn
