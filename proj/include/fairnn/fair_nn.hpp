#pragma once

// Fair near-neighbor queries on top of an LshIndex: the query's buckets
// form the sub-family, and points outside the relevant ball are outliers.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairnn/lsh_index.hpp"
#include "fairnn/union_sampling.hpp"

namespace fairnn {

/// Every replica reported more than omega outliers.
class ReplicaExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FairNnProblem { DependentFairNN, ApproxFairANN, ApproxFairNN, FairNNIS };

struct FairNnAnswer {
    SampleStatus status = SampleStatus::None;
    ElementId point = 0;
    double distance = std::numeric_limits<double>::infinity();
    std::size_t replica = 0;
    std::size_t attempts = 0;  ///< replicas tried, or outer resampling rounds
    SampleOutcome diagnostics;

    bool has_point() const { return status == SampleStatus::Element; }
};

struct FairNnConfig {
    std::optional<std::size_t> omega;  ///< default 3 L ceil(log2 n)
    SamplerConfig sampler;
    bool outlier_flag = false;         ///< approximate NN: treat points beyond r as outliers
    std::size_t resample_cap = 100000; ///< approximate NN: outer resampling rounds
};

/// Default outlier budget 3 L ceil(log2 n).
inline std::size_t default_outlier_budget(std::size_t L, std::size_t n) {
    std::size_t lg = 0;
    while ((std::size_t{1} << lg) < n) ++lg;
    return 3 * L * std::max<std::size_t>(lg, 1);
}

/// Per-iteration record of the work-minimizing variant.
struct WhpIteration {
    std::size_t k = 0;
    std::size_t segment = 0;
    std::vector<std::size_t> work;  ///< range-count work per replica
    std::size_t chosen = 0;
};
using WhpTrace = std::function<void(const WhpIteration&)>;

namespace detail {

template <class Space>
FairNnAnswer finish(const LshIndex<Space>& index, const typename Space::Point& q,
                    const SampleOutcome& o, std::size_t replica, double bound) {
    FairNnAnswer a;
    a.status = o.status;
    a.diagnostics = o;
    a.replica = replica;
    if (o.has_element()) {
        a.point = o.element;
        a.distance = index.distance(q, o.element);
        if (a.distance > bound) {
            throw std::logic_error("sampler returned point " + std::to_string(o.element) +
                                   " at distance " + std::to_string(a.distance) +
                                   " beyond the radius " + std::to_string(bound));
        }
    }
    return a;
}

template <class Space>
std::size_t omega_for(const LshIndex<Space>& index, const FairNnConfig& cfg) {
    return cfg.omega ? *cfg.omega : default_outlier_budget(index.params().L, index.size());
}

// sample_approx_outliers on replicas round-robin from a random start,
// moving on whenever a replica exceeds the outlier budget.
template <class Space, class Gen>
FairNnAnswer approx_over_replicas(const LshIndex<Space>& index, const typename Space::Point& q,
                                  double eps, double radius, Gen& gen, const FairNnConfig& cfg) {
    const std::size_t reps = index.params().replicas;
    const std::size_t omega = omega_for(index, cfg);
    const std::size_t start = uniform_index(gen, reps);
    for (std::size_t j = 0; j < reps; ++j) {
        const std::size_t rep = (start + j) % reps;
        SubFamilyQuery sq;
        sq.set_ids = index.query_bucket_ids(q, rep);
        sq.outlier = index.outlier_oracle(q, radius);
        const SampleOutcome o = sample_approx_outliers(index.family(), sq, eps, omega, gen, cfg.sampler);
        if (o.status == SampleStatus::BudgetExceeded) continue;
        FairNnAnswer a = finish(index, q, o, rep, radius);
        a.attempts = j + 1;
        return a;
    }
    throw ReplicaExhausted("all " + std::to_string(reps) + " replicas exceeded the outlier budget of " +
                           std::to_string(omega));
}

}  // namespace detail

/// Uniform over the collided part of B(q, r) via the min-rank sampler with
/// rank perturbation; repeated identical queries are conditionally
/// uniform. Mutates the index's rank permutation.
template <class Space>
FairNnAnswer fair_nn_dependent(LshIndex<Space>& index, const typename Space::Point& q) {
    SubFamilyQuery sq = index.query_buckets(q, 0, Neighborhood::Exact);
    const SampleOutcome o = sample_perturb_outliers(index.family(), sq);
    return detail::finish(index, q, o, 0, index.radius(Neighborhood::Exact));
}

/// eps-uniform over a set S' with B(q, r) within S' within B(q, c r).
template <class Space, class Gen>
FairNnAnswer fair_ann_approx(const LshIndex<Space>& index, const typename Space::Point& q, double eps,
                             Gen& gen, const FairNnConfig& cfg = {}) {
    return detail::approx_over_replicas(index, q, eps, index.radius(Neighborhood::Approximate), gen,
                                        cfg);
}

/// Looks for a collided point within r, replica by replica, each scan
/// giving up after 3L points beyond c r.
template <class Space>
bool collided_near_point_exists(const LshIndex<Space>& index, const typename Space::Point& q) {
    const double r = index.radius(Neighborhood::Exact);
    const double cr = index.radius(Neighborhood::Approximate);
    for (std::size_t rep = 0; rep < index.params().replicas; ++rep) {
        std::size_t far = 0;
        bool stop = false;
        for (SetId b : index.query_bucket_ids(q, rep)) {
            for (ElementId p : index.bucket(b)) {
                const double d = index.distance(q, p);
                if (d <= r) return true;
                if (d > cr && ++far > 3 * index.params().L) {
                    stop = true;
                    break;
                }
            }
            if (stop) break;
        }
    }
    return false;
}

/// eps-uniform over B(q, r): either resample fair_ann_approx until the
/// draw lies within r, or (outlier_flag) treat everything beyond r as an
/// outlier directly.
template <class Space, class Gen>
FairNnAnswer fair_nn_approx(const LshIndex<Space>& index, const typename Space::Point& q, double eps,
                            Gen& gen, const FairNnConfig& cfg = {}) {
    if (!collided_near_point_exists(index, q)) return {};
    const double r = index.radius(Neighborhood::Exact);
    if (cfg.outlier_flag) return detail::approx_over_replicas(index, q, eps, r, gen, cfg);
    for (std::size_t round = 1; round <= cfg.resample_cap; ++round) {
        FairNnAnswer a = fair_ann_approx(index, q, eps, gen, cfg);
        if (!a.has_point()) return a;
        if (a.distance <= r) {
            a.attempts = round;
            return a;
        }
    }
    throw SamplingError("approximate NN query exceeded " + std::to_string(cfg.resample_cap) +
                        " resampling rounds");
}

/// Exactly uniform over B(q, r) among points collided in any replica, and
/// independent across queries: the segment sampler over all query buckets.
template <class Space, class Gen>
FairNnAnswer fair_nn_independent(const LshIndex<Space>& index, const typename Space::Point& q,
                                 Gen& gen, const FairNnConfig& cfg = {}) {
    SubFamilyQuery sq;
    for (std::size_t rep = 0; rep < index.params().replicas; ++rep) {
        const auto ids = index.query_bucket_ids(q, rep);
        sq.set_ids.insert(sq.set_ids.end(), ids.begin(), ids.end());
    }
    const double r = index.radius(Neighborhood::Exact);
    sq.outlier = index.outlier_oracle(q, r);
    const SampleOutcome o = sample_segment_outliers(index.family(), sq, index.sketch_lookup(),
                                                    detail::omega_for(index, cfg), gen, cfg.sampler);
    return detail::finish(index, q, o, 0, r);
}

/// High-probability variant: k starts at the smallest power of two >= n
/// and, for each drawn segment, the replica whose buckets hold the fewest
/// ranks in that segment does the scan.
template <class Space, class Gen>
FairNnAnswer fair_nn_independent_whp(const LshIndex<Space>& index, const typename Space::Point& q,
                                     Gen& gen, const FairNnConfig& cfg = {},
                                     const WhpTrace& trace = {}) {
    const RankedFamily& family = index.family();
    const std::size_t n = family.num_elements();
    const std::size_t reps = index.params().replicas;
    const double r = index.radius(Neighborhood::Exact);
    std::vector<SubFamilyQuery> per_rep(reps);
    for (std::size_t rep = 0; rep < reps; ++rep) {
        per_rep[rep].set_ids = index.query_bucket_ids(q, rep);
        per_rep[rep].outlier = index.outlier_oracle(q, r);
    }
    SampleOutcome out;
    if (std::all_of(per_rep.begin(), per_rep.end(), [](const SubFamilyQuery& sq) { return sq.set_ids.empty(); })) {
        return detail::finish(index, q, out, 0, r);
    }
    const std::size_t lambda = segment_lambda(n, cfg.sampler);
    const std::size_t sigma = segment_sigma(n, cfg.sampler);
    const std::size_t omega = detail::omega_for(index, cfg);
    std::size_t k = std::bit_ceil(std::max<std::size_t>(n, 2));
    std::size_t sigma_fail = 0;
    WhpIteration it;
    while (k >= 2) {
        ++out.rounds;
        const std::size_t h = uniform_index(gen, k);
        const auto [lo, hi] = segment_bounds(n, k, h);
        it.k = k;
        it.segment = h;
        it.work.assign(reps, 0);
        for (std::size_t rep = 0; rep < reps; ++rep) {
            for (SetId s : per_rep[rep].set_ids) it.work[rep] += family.rank_count(s, lo, hi);
        }
        it.chosen = static_cast<std::size_t>(std::min_element(it.work.begin(), it.work.end()) -
                                             it.work.begin());
        if (trace) trace(it);
        const SegmentScan scan = scan_segment(family, per_rep[it.chosen], k, h, omega);
        out.probes += scan.probes;
        out.outliers_seen += scan.outliers;
        if (scan.budget_exceeded) {
            out.status = SampleStatus::BudgetExceeded;
            return detail::finish(index, q, out, it.chosen, r);
        }
        detail::check_lambda(scan.inliers.size(), lambda, h);
        if (bernoulli(gen, static_cast<double>(scan.inliers.size()) / static_cast<double>(lambda))) {
            out.status = SampleStatus::Element;
            out.element = scan.inliers[uniform_index(gen, scan.inliers.size())];
            return detail::finish(index, q, out, it.chosen, r);
        }
        if (++sigma_fail == sigma) {
            k /= 2;
            sigma_fail = 0;
        }
    }
    return detail::finish(index, q, out, 0, r);
}

}  // namespace fairnn
