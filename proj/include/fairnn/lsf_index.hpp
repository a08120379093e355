#pragma once

// Locality-sensitive filters for inner-product similarity on unit vectors.
// Each repetition draws t parts of F Gaussian filters; a point is stored
// once, in the bucket (j_1, ..., j_t) of its per-part argmax filters. A
// query enumerates I_1 x ... x I_t where I_i holds the filters whose inner
// product with q reaches alpha * Delta_{q,i} - f(alpha, eps).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fairnn/random.hpp"
#include "fairnn/set_family.hpp"
#include "fairnn/sketches.hpp"
#include "fairnn/spaces.hpp"
#include "fairnn/union_sampling.hpp"

namespace fairnn {

class LsfBuildError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LsfParams {
    double alpha = 0.5;  ///< near threshold on <p, q>
    double beta = 0.0;   ///< far threshold, beta < alpha
    double eps = 0.2;    ///< query slack: f(alpha, eps)
    std::optional<std::size_t> filters_per_part;  ///< m^(1/t); default from n, alpha, beta
    std::optional<std::size_t> repetitions;       ///< default ceil(log2 n)
    double kappa = 9.0;  ///< analysis constant, delta = exp(-sqrt(kappa))
    std::uint64_t seed = 0;

    bool operator==(const LsfParams&) const = default;
};

/// t = ceil(1 / (1 - alpha^2)).
inline std::size_t lsf_tensor_parts(double alpha) {
    return static_cast<std::size_t>(std::ceil(1.0 / (1.0 - alpha * alpha) - 1e-12));
}

/// f(alpha, eps) = sqrt(2 (1 - alpha^2) ln(1 / eps)).
inline double lsf_f(double alpha, double eps) {
    return std::sqrt(2.0 * (1.0 - alpha * alpha) * std::log(1.0 / eps));
}

/// alpha * Delta_{q,i} - f(alpha, eps).
inline double lsf_query_threshold(const LsfParams& p, double delta_q) {
    return p.alpha * delta_q - lsf_f(p.alpha, p.eps);
}

inline double lsf_rho(double alpha, double beta) {
    const double d = 1.0 - alpha * beta;
    return (1.0 - alpha * alpha) * (1.0 - beta * beta) / (d * d);
}

/// m = n^((1 - beta^2) / (1 - alpha beta)^2).
inline double lsf_default_m(std::size_t n, double alpha, double beta) {
    const double d = 1.0 - alpha * beta;
    return std::pow(static_cast<double>(n), (1.0 - beta * beta) / (d * d));
}

/// Failure probability bound of one argmax threshold: exp(-sqrt(kappa)).
inline double lsf_delta(double kappa) { return std::exp(-std::sqrt(kappa)); }

/// Argmax level sqrt(2 ln m - ln(4 kappa pi ln m)) used in the analysis.
inline double lsf_t_x(double m, double kappa) {
    const double lm = std::log(m);
    return std::sqrt(std::max(0.0, 2.0 * lm - std::log(4.0 * kappa * std::numbers::pi * lm)));
}

inline void validate_lsf_params(const LsfParams& p) {
    if (!(p.alpha > -1.0 && p.alpha < 1.0 && p.beta > -1.0 && p.beta < p.alpha)) {
        throw LsfBuildError("thresholds must satisfy -1 < beta < alpha < 1");
    }
    if (!(p.eps > 0.0 && p.eps <= 1.0)) throw LsfBuildError("eps must lie in (0, 1]");
    if (p.filters_per_part && *p.filters_per_part == 0) throw LsfBuildError("filters_per_part must be positive");
    if (p.repetitions && *p.repetitions == 0) throw LsfBuildError("repetitions must be positive");
}

struct LsfScanStats {
    std::size_t buckets = 0;  ///< non-empty buckets enumerated
    std::size_t points = 0;   ///< points in them
    std::size_t far = 0;      ///< points with <p, q> < beta
};

class LsfIndex {
public:
    using BucketTuple = std::vector<std::uint32_t>;

    static LsfIndex build(std::vector<Vector> points, const LsfParams& params) {
        validate_lsf_params(params);
        if (points.empty()) throw LsfBuildError("cannot build an index over an empty dataset");
        const std::size_t d = points.front().size();
        if (d == 0) throw LsfBuildError("points must have dimension >= 1");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (points[i].size() != d) {
                throw LsfBuildError("point " + std::to_string(i) + " has dimension " +
                                    std::to_string(points[i].size()) + ", expected " + std::to_string(d));
            }
            const double norm = std::sqrt(dot(points[i], points[i]));
            if (std::abs(norm - 1.0) > 1e-6) {
                throw LsfBuildError("point " + std::to_string(i) + " is not unit norm (norm " +
                                    std::to_string(norm) + ")");
            }
        }
        LsfIndex idx;
        idx.params_ = params;
        idx.points_ = std::move(points);
        idx.dim_ = d;
        const std::size_t n = idx.points_.size();
        idx.parts_ = lsf_tensor_parts(params.alpha);
        idx.per_part_ = params.filters_per_part
                            ? *params.filters_per_part
                            : static_cast<std::size_t>(std::ceil(
                                  std::pow(lsf_default_m(n, params.alpha, params.beta),
                                           1.0 / static_cast<double>(idx.parts_)) - 1e-9));
        idx.per_part_ = std::max<std::size_t>(idx.per_part_, 1);
        if (std::pow(static_cast<double>(idx.per_part_), static_cast<double>(idx.parts_)) >= 1.8e19) {
            throw LsfBuildError("filters_per_part^t does not fit a 64-bit bucket key");
        }
        std::size_t lg = 0;
        while ((std::size_t{1} << lg) < n) ++lg;
        idx.reps_ = params.repetitions ? *params.repetitions : std::max<std::size_t>(lg, 1);

        Rng filter_rng(derive_seed(params.seed, 21));
        std::normal_distribution<double> normal(0.0, 1.0);
        idx.filters_.resize(idx.reps_ * idx.parts_ * idx.per_part_ * d);
        for (auto& x : idx.filters_) x = normal(filter_rng);

        idx.tables_.resize(idx.reps_);
        idx.point_buckets_.assign(n * idx.reps_, 0);
        for (std::size_t rep = 0; rep < idx.reps_; ++rep) {
            for (ElementId p = 0; p < n; ++p) {
                const std::uint64_t key = idx.encode(idx.assign(rep, idx.points_[p]));
                auto [it, fresh] = idx.tables_[rep].try_emplace(key, static_cast<SetId>(idx.buckets_.size()));
                if (fresh) {
                    idx.buckets_.emplace_back();
                    idx.bucket_rep_.push_back(static_cast<std::uint32_t>(rep));
                    idx.bucket_key_.push_back(key);
                }
                idx.buckets_[it->second].push_back(p);
                idx.point_buckets_[p * idx.reps_ + rep] = it->second;
            }
        }
        Rng order_rng(derive_seed(params.seed, 22));
        for (auto& b : idx.buckets_) std::shuffle(b.begin(), b.end(), order_rng);
        idx.stamps_.assign(idx.buckets_.size(), 0);
        return idx;
    }

    const LsfParams& params() const { return params_; }
    std::size_t size() const { return points_.size(); }
    std::size_t dimension() const { return dim_; }
    std::size_t parts() const { return parts_; }
    std::size_t filters_per_part() const { return per_part_; }
    std::size_t repetitions() const { return reps_; }
    const Vector& point(ElementId p) const { return points_[p]; }

    std::size_t num_buckets() const { return buckets_.size(); }
    const std::vector<ElementId>& bucket(SetId b) const { return buckets_[b]; }
    const std::vector<std::vector<ElementId>>& buckets() const { return buckets_; }
    std::size_t bucket_repetition(SetId b) const { return bucket_rep_[b]; }
    BucketTuple bucket_tuple(SetId b) const { return decode(bucket_key_[b]); }
    /// The bucket of indexed point p in repetition rep.
    SetId bucket_of_point(ElementId p, std::size_t rep) const { return point_buckets_[p * reps_ + rep]; }

    std::span<const double> filter(std::size_t rep, std::size_t part, std::size_t j) const {
        return {filters_.data() + ((rep * parts_ + part) * per_part_ + j) * dim_, dim_};
    }

    /// Argmax filter per part, ties to the lowest index.
    BucketTuple assign(std::size_t rep, const Vector& v) const {
        BucketTuple t(parts_);
        for (std::size_t i = 0; i < parts_; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < per_part_; ++j) {
                const double s = dot(filter(rep, i, j), v);
                if (s > best) {
                    best = s;
                    t[i] = static_cast<std::uint32_t>(j);
                }
            }
        }
        return t;
    }

    /// Per part, the filters at or above the query threshold.
    std::vector<std::vector<std::uint32_t>> above_threshold(std::size_t rep, const Vector& q,
                                                            double eps) const {
        std::vector<std::vector<std::uint32_t>> sets(parts_);
        const double f = lsf_f(params_.alpha, eps);
        std::vector<double> s(per_part_);
        for (std::size_t i = 0; i < parts_; ++i) {
            for (std::size_t j = 0; j < per_part_; ++j) s[j] = dot(filter(rep, i, j), q);
            const double delta = *std::max_element(s.begin(), s.end());
            const double thr = params_.alpha * delta - f;
            for (std::size_t j = 0; j < per_part_; ++j) {
                if (s[j] >= thr) sets[i].push_back(static_cast<std::uint32_t>(j));
            }
        }
        return sets;
    }

    /// Non-empty buckets of I_1 x ... x I_t in repetition rep, enumerated
    /// in lexicographic order.
    std::vector<SetId> query_buckets(const Vector& q, std::size_t rep) const {
        return query_buckets(q, rep, params_.eps);
    }
    std::vector<SetId> query_buckets(const Vector& q, std::size_t rep, double eps) const {
        const auto sets = above_threshold(rep, q, eps);
        std::vector<SetId> out;
        for (const auto& s : sets) {
            if (s.empty()) return out;
        }
        std::vector<std::size_t> pos(parts_, 0);
        while (true) {
            std::uint64_t key = 0;
            for (std::size_t i = parts_; i-- > 0;) key = key * per_part_ + sets[i][pos[i]];
            const auto it = tables_[rep].find(key);
            if (it != tables_[rep].end()) out.push_back(it->second);
            std::size_t i = parts_;
            while (i-- > 0) {
                if (++pos[i] < sets[i].size()) break;
                pos[i] = 0;
            }
            if (i == std::numeric_limits<std::size_t>::max()) break;
        }
        return out;
    }

    double similarity(const Vector& q, ElementId p) const { return dot(q, points_[p]); }

    // Query-epoch stamps for degree counting; mutated by lsf_fair_query.
    std::uint64_t next_epoch() { return ++epoch_; }
    void stamp(SetId b, std::uint64_t epoch) { stamps_[b] = epoch; }
    bool stamped(SetId b, std::uint64_t epoch) const { return stamps_[b] == epoch; }
    std::vector<ElementId>& mutable_bucket(SetId b) { return buckets_[b]; }

private:
    std::uint64_t encode(const BucketTuple& t) const {
        std::uint64_t key = 0;
        for (std::size_t i = parts_; i-- > 0;) key = key * per_part_ + t[i];
        return key;
    }
    BucketTuple decode(std::uint64_t key) const {
        BucketTuple t(parts_);
        for (std::size_t i = 0; i < parts_; ++i) {
            t[i] = static_cast<std::uint32_t>(key % per_part_);
            key /= per_part_;
        }
        return t;
    }

    LsfParams params_;
    std::vector<Vector> points_;
    std::size_t dim_ = 0;
    std::size_t parts_ = 1;
    std::size_t per_part_ = 1;
    std::size_t reps_ = 1;
    std::vector<double> filters_;  ///< rep-major, then part, then filter, then coordinate
    std::vector<std::unordered_map<std::uint64_t, SetId>> tables_;
    std::vector<std::vector<ElementId>> buckets_;
    std::vector<std::uint32_t> bucket_rep_;
    std::vector<std::uint64_t> bucket_key_;
    std::vector<SetId> point_buckets_;  ///< point-major, one bucket per repetition
    std::vector<std::uint64_t> stamps_;
    std::uint64_t epoch_ = 0;
};

/// Classic query: scan the enumerated buckets, repetition by repetition,
/// and return the first point with <p, q> >= beta.
inline std::optional<ElementId> lsf_ann_query(const LsfIndex& index, const Vector& q) {
    for (std::size_t rep = 0; rep < index.repetitions(); ++rep) {
        for (SetId b : index.query_buckets(q, rep)) {
            for (ElementId p : index.bucket(b)) {
                if (index.similarity(q, p) >= index.params().beta) return p;
            }
        }
    }
    return std::nullopt;
}

/// Counts enumerated buckets and far points (<p, q> < beta) over all
/// repetitions.
inline LsfScanStats lsf_scan_stats(const LsfIndex& index, const Vector& q, double beta) {
    LsfScanStats st;
    for (std::size_t rep = 0; rep < index.repetitions(); ++rep) {
        for (SetId b : index.query_buckets(q, rep)) {
            ++st.buckets;
            st.points += index.bucket(b).size();
            for (ElementId p : index.bucket(b)) st.far += index.similarity(q, p) < beta;
        }
    }
    return st;
}

struct LsfFairAnswer {
    SampleStatus status = SampleStatus::None;
    ElementId point = 0;
    double similarity = -std::numeric_limits<double>::infinity();
    std::size_t rounds = 0;
    std::size_t far_removed = 0;
    std::size_t degree = 0;  ///< degree of the accepted point

    bool has_point() const { return status == SampleStatus::Element; }
};

/// Uniform over the collided points with <p, q> >= alpha. Far points
/// picked during the rejection loop are swapped out of their bucket and
/// put back, in reverse order, before returning. Requires exclusive
/// access to the index.
template <class Gen>
LsfFairAnswer lsf_fair_query(LsfIndex& index, const Vector& q, Gen& gen, std::size_t round_cap = 0) {
    const double alpha = index.params().alpha;
    std::vector<SetId> fam;
    for (std::size_t rep = 0; rep < index.repetitions(); ++rep) {
        const auto ids = index.query_buckets(q, rep);
        fam.insert(fam.end(), ids.begin(), ids.end());
    }
    LsfFairAnswer out;
    bool any_near = false;
    for (SetId b : fam) {
        for (ElementId p : index.bucket(b)) {
            if (index.similarity(q, p) >= alpha) {
                any_near = true;
                break;
            }
        }
        if (any_near) break;
    }
    if (!any_near) return out;

    const std::uint64_t epoch = index.next_epoch();
    for (SetId b : fam) index.stamp(b, epoch);
    std::vector<std::size_t> active(fam.size());
    std::vector<double> weights(fam.size());
    std::size_t mass = 0;
    for (std::size_t i = 0; i < fam.size(); ++i) {
        active[i] = index.bucket(fam[i]).size();
        weights[i] = static_cast<double>(active[i]);
        mass += active[i];
    }
    WeightedTree tree(weights);
    // (slot, position) of every removal; undone in reverse.
    std::vector<std::pair<std::size_t, std::size_t>> removed;
    const auto restore = [&] {
        for (auto it = removed.rbegin(); it != removed.rend(); ++it) {
            auto& b = index.mutable_bucket(fam[it->first]);
            std::swap(b[it->second], b[active[it->first]]);
            ++active[it->first];
        }
    };
    const std::size_t cap = round_cap ? round_cap
                                      : std::max<std::size_t>(10000, 64 * mass * index.repetitions());
    while (true) {
        if (out.rounds >= cap) {
            restore();
            throw SamplingError("filter sampler exceeded its round cap of " + std::to_string(cap));
        }
        ++out.rounds;
        const std::size_t slot = tree.sample(gen);
        auto& b = index.mutable_bucket(fam[slot]);
        const std::size_t pos = uniform_index(gen, active[slot]);
        const ElementId p = b[pos];
        const double sim = index.similarity(q, p);
        if (sim < alpha) {
            --active[slot];
            std::swap(b[pos], b[active[slot]]);
            removed.emplace_back(slot, pos);
            tree.update(slot, static_cast<double>(active[slot]));
            ++out.far_removed;
            continue;
        }
        std::size_t degree = 0;
        for (std::size_t rep = 0; rep < index.repetitions(); ++rep) {
            degree += index.stamped(index.bucket_of_point(p, rep), epoch);
        }
        if (uniform_index(gen, degree) == 0) {
            out.status = SampleStatus::Element;
            out.point = p;
            out.similarity = sim;
            out.degree = degree;
            restore();
            return out;
        }
    }
}

}  // namespace fairnn
