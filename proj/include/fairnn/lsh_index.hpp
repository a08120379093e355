#pragma once

// Multi-table LSH index over set-valued (1-bit MinHash) or vector
// (randomly shifted 1-d grid over a Gaussian projection) data. All
// buckets of all replicas form one RankedFamily so the union samplers can
// run on any sub-family of buckets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
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

class LshBuildError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class LshKind { MinHash1Bit, EuclideanGrid };

struct LshParams {
    std::size_t k = 1;         ///< unit hashes concatenated per table
    std::size_t L = 1;         ///< tables per replica
    std::size_t replicas = 1;  ///< independent copies of the L tables
    double w = 1.0;            ///< grid width (Euclidean only)
    double r = 0.0;            ///< near radius, in distance
    double c = 1.0;            ///< approximation factor, far radius is c * r
    std::uint64_t seed = 0;
    bool sketches = true;      ///< build per-bucket distinct sketches

    bool operator==(const LshParams&) const = default;
};

/// 1-bit MinHash: the minimizer of a seeded 64-bit mixer over the tokens,
/// reduced to the parity of a second keyed hash of the minimizer.
class MinHashBit {
public:
    MinHashBit() = default;
    MinHashBit(std::uint64_t order_seed, std::uint64_t bit_seed)
        : order_seed_(order_seed), bit_seed_(bit_seed) {}

    template <class Gen>
    static MinHashBit draw(Gen& gen, const LshParams&, std::size_t) {
        const std::uint64_t a = gen();
        const std::uint64_t b = gen();
        return MinHashBit(a, b);
    }

    std::int64_t operator()(const TokenSet& s) const {
        if (s.empty()) return 2;
        std::uint64_t best = ~std::uint64_t{0};
        std::uint32_t arg = s.front();
        for (std::uint32_t t : s) {
            const std::uint64_t v = splitmix64(t ^ order_seed_);
            if (v < best) {
                best = v;
                arg = t;
            }
        }
        return static_cast<std::int64_t>(splitmix64(arg + bit_seed_) & 1u);
    }

    std::uint64_t order_seed() const { return order_seed_; }
    std::uint64_t bit_seed() const { return bit_seed_; }
    bool operator==(const MinHashBit&) const = default;

private:
    std::uint64_t order_seed_ = 0;
    std::uint64_t bit_seed_ = 0;
};

/// floor((<a, v> + b) / w) with a ~ N(0, I_d) and b ~ U[0, w).
class GridHash {
public:
    GridHash() = default;
    GridHash(Vector a, double b, double w) : a_(std::move(a)), b_(b), w_(w) {}

    template <class Gen>
    static GridHash draw(Gen& gen, const LshParams& p, std::size_t dim) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector a(dim);
        for (auto& x : a) x = normal(gen);
        const double b = uniform_unit(gen) * p.w;
        return GridHash(std::move(a), b, p.w);
    }

    std::int64_t operator()(const Vector& v) const {
        return static_cast<std::int64_t>(std::floor((dot(a_, v) + b_) / w_));
    }

    const Vector& a() const { return a_; }
    double b() const { return b_; }
    double w() const { return w_; }
    bool operator==(const GridHash&) const = default;

private:
    Vector a_;
    double b_ = 0;
    double w_ = 1;
};

template <class Space>
struct LshTraits;

template <>
struct LshTraits<JaccardSpace> {
    using Unit = MinHashBit;
    static constexpr LshKind kind = LshKind::MinHash1Bit;
    static std::size_t dimension(const TokenSet&) { return 0; }
};

template <>
struct LshTraits<EuclideanSpace> {
    using Unit = GridHash;
    static constexpr LshKind kind = LshKind::EuclideanGrid;
    static std::size_t dimension(const Vector& v) { return v.size(); }
};

/// Standard normal upper tail.
inline double normal_upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Single unit-hash collision probability. MinHash takes a Jaccard
/// similarity in [0, 1]; the grid takes a distance >= 0 and width w.
inline double collision_probability(LshKind kind, double arg, double w = 1.0) {
    if (kind == LshKind::MinHash1Bit) {
        if (!(arg >= 0.0 && arg <= 1.0)) throw std::domain_error("Jaccard similarity must be in [0, 1]");
        return (1.0 + arg) / 2.0;
    }
    if (!(arg >= 0.0)) throw std::domain_error("distance must be non-negative");
    if (!(w > 0.0)) throw std::domain_error("grid width must be positive");
    if (arg == 0.0) return 1.0;
    const double ratio = w / arg;
    return 1.0 - 2.0 * normal_upper_tail(ratio) -
           (2.0 / (std::sqrt(2.0 * std::numbers::pi) * ratio)) * (1.0 - std::exp(-ratio * ratio / 2.0));
}

/// Probability that a k-wise concatenation collides.
inline double table_collision_probability(LshKind kind, double arg, std::size_t k, double w = 1.0) {
    return std::pow(collision_probability(kind, arg, w), static_cast<double>(k));
}

using BucketKey = std::vector<std::int64_t>;

struct BucketKeyHash {
    std::uint64_t seed = 0;
    std::size_t operator()(const BucketKey& key) const {
        std::uint64_t h = seed;
        for (std::int64_t v : key) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
        return static_cast<std::size_t>(h);
    }
};

struct CollisionStats {
    std::size_t buckets = 0;           ///< non-empty buckets hit
    std::size_t collisions = 0;        ///< points summed over buckets, with repeats
    std::size_t distinct = 0;          ///< distinct collided points
    std::size_t within_r = 0;
    std::size_t within_cr = 0;
};

enum class Neighborhood { Exact, Approximate };

/// Everything needed to rebuild an index bit for bit.
template <class Space>
struct LshIndexState {
    using Unit = typename LshTraits<Space>::Unit;
    LshParams params;
    std::vector<typename Space::Point> points;
    std::vector<Unit> units;                     ///< replica-major, then table, then k
    std::vector<std::uint32_t> bucket_table;     ///< global table index per bucket
    std::vector<BucketKey> bucket_keys;
    std::vector<std::vector<ElementId>> buckets; ///< member order as scanned
    std::vector<ElementId> rank_order;           ///< element at rank r
    Rng perturbation;
};

template <class Space>
class LshIndex {
public:
    using Point = typename Space::Point;
    using Unit = typename LshTraits<Space>::Unit;

    static LshIndex build(std::vector<Point> points, const LshParams& params) {
        if (points.empty()) throw LshBuildError("cannot build an index over an empty dataset");
        if (params.k == 0 || params.L == 0 || params.replicas == 0) {
            throw LshBuildError("k, L and replicas must be positive");
        }
        if (LshTraits<Space>::kind == LshKind::EuclideanGrid && !(params.w > 0.0)) {
            throw LshBuildError("grid width w must be positive");
        }
        const std::size_t dim = LshTraits<Space>::dimension(points.front());
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (LshTraits<Space>::dimension(points[i]) != dim) {
                throw LshBuildError("point " + std::to_string(i) + " has dimension " +
                                    std::to_string(LshTraits<Space>::dimension(points[i])) +
                                    ", expected " + std::to_string(dim));
            }
        }
        LshIndex idx;
        idx.params_ = params;
        idx.points_ = std::move(points);
        idx.dim_ = dim;
        const std::size_t n = idx.points_.size();
        const std::size_t tables = params.replicas * params.L;

        Rng hash_rng(derive_seed(params.seed, 11));
        idx.units_.reserve(tables * params.k);
        for (std::size_t u = 0; u < tables * params.k; ++u) {
            idx.units_.push_back(Unit::draw(hash_rng, params, dim));
        }
        idx.init_tables();
        idx.point_bucket_.assign(tables * n, 0);
        for (std::size_t t = 0; t < tables; ++t) {
            for (ElementId p = 0; p < n; ++p) {
                BucketKey key = idx.key(idx.points_[p], t);
                auto [it, fresh] = idx.tables_[t].try_emplace(key, static_cast<SetId>(idx.buckets_.size()));
                if (fresh) {
                    idx.buckets_.emplace_back();
                    idx.bucket_keys_.push_back(std::move(key));
                    idx.bucket_table_.push_back(static_cast<std::uint32_t>(t));
                }
                idx.buckets_[it->second].push_back(p);
                idx.point_bucket_[t * n + p] = it->second;
            }
        }
        Rng order_rng(derive_seed(params.seed, 12));
        for (auto& b : idx.buckets_) std::shuffle(b.begin(), b.end(), order_rng);
        idx.family_ = RankedFamily::build(n, idx.buckets_, derive_seed(params.seed, 13));
        idx.build_sketches();
        return idx;
    }

    static LshIndex restore(LshIndexState<Space> st) {
        LshIndex idx;
        idx.params_ = st.params;
        idx.points_ = std::move(st.points);
        if (idx.points_.empty()) throw LshBuildError("restored index has no points");
        idx.dim_ = LshTraits<Space>::dimension(idx.points_.front());
        idx.units_ = std::move(st.units);
        const std::size_t n = idx.points_.size();
        const std::size_t tables = idx.params_.replicas * idx.params_.L;
        if (idx.units_.size() != tables * idx.params_.k || st.buckets.size() != st.bucket_keys.size() ||
            st.buckets.size() != st.bucket_table.size()) {
            throw LshBuildError("inconsistent index state");
        }
        idx.init_tables();
        idx.buckets_ = std::move(st.buckets);
        idx.bucket_keys_ = std::move(st.bucket_keys);
        idx.bucket_table_ = std::move(st.bucket_table);
        idx.point_bucket_.assign(tables * n, 0);
        for (SetId b = 0; b < idx.buckets_.size(); ++b) {
            const std::size_t t = idx.bucket_table_[b];
            if (t >= tables) throw LshBuildError("bucket table index out of range");
            idx.tables_[t].emplace(idx.bucket_keys_[b], b);
            for (ElementId p : idx.buckets_[b]) {
                if (p >= n) throw LshBuildError("bucket member out of range");
                idx.point_bucket_[t * n + p] = b;
            }
        }
        idx.family_ = RankedFamily::build_with_order(idx.buckets_, std::move(st.rank_order));
        idx.family_.set_perturbation_rng(st.perturbation);
        idx.build_sketches();
        return idx;
    }

    LshIndexState<Space> state() const {
        LshIndexState<Space> st;
        st.params = params_;
        st.points = points_;
        st.units = units_;
        st.bucket_table = bucket_table_;
        st.bucket_keys = bucket_keys_;
        st.buckets = buckets_;
        const auto order = family_.ground().order();
        st.rank_order.assign(order.begin(), order.end());
        st.perturbation = family_.perturbation_rng();
        return st;
    }

    const LshParams& params() const { return params_; }
    std::size_t size() const { return points_.size(); }
    std::size_t dimension() const { return dim_; }
    std::size_t num_tables() const { return params_.replicas * params_.L; }
    const std::vector<Point>& points() const { return points_; }
    const Point& point(ElementId p) const { return points_[p]; }

    const RankedFamily& family() const { return family_; }
    RankedFamily& family() { return family_; }

    std::size_t num_buckets() const { return buckets_.size(); }
    const std::vector<ElementId>& bucket(SetId b) const { return buckets_[b]; }
    std::size_t bucket_table(SetId b) const { return bucket_table_[b]; }

    /// Bucket of indexed point p in global table t.
    SetId bucket_of_point(ElementId p, std::size_t table) const {
        return point_bucket_[table * points_.size() + p];
    }

    bool has_sketches() const { return !sketches_.empty(); }
    const DistinctSketch& sketch(SetId b) const {
        if (sketches_.empty()) throw LshBuildError("index was built without bucket sketches");
        return sketches_[b];
    }
    SketchLookup sketch_lookup() const {
        return [this](SetId b) -> const DistinctSketch& { return sketch(b); };
    }

    BucketKey key(const Point& q, std::size_t table) const {
        BucketKey k(params_.k);
        const Unit* u = &units_[table * params_.k];
        for (std::size_t j = 0; j < params_.k; ++j) k[j] = u[j](q);
        return k;
    }

    std::optional<SetId> query_bucket(const Point& q, std::size_t table) const {
        const auto it = tables_[table].find(key(q, table));
        if (it == tables_[table].end()) return std::nullopt;
        return it->second;
    }

    /// Non-empty buckets of q in the L tables of one replica, in table order.
    std::vector<SetId> query_bucket_ids(const Point& q, std::size_t replica) const {
        std::vector<SetId> ids;
        for (std::size_t i = 0; i < params_.L; ++i) {
            if (auto b = query_bucket(q, replica * params_.L + i)) ids.push_back(*b);
        }
        return ids;
    }

    double distance(const Point& q, ElementId p) const { return Space::distance(q, points_[p]); }

    double radius(Neighborhood mode) const {
        return mode == Neighborhood::Exact ? params_.r : params_.c * params_.r;
    }

    /// Outlier predicate: distance(q, p) > radius.
    OutlierOracle outlier_oracle(const Point& q, double radius) const {
        auto qp = std::make_shared<const Point>(q);
        return [this, qp, radius](ElementId p) { return Space::distance(*qp, points_[p]) > radius; };
    }

    /// The buckets of q in one replica as a sub-family, with outliers
    /// beyond r (exact mode) or c r (approximate mode).
    SubFamilyQuery query_buckets(const Point& q, std::size_t replica,
                                 Neighborhood mode = Neighborhood::Exact) const {
        SubFamilyQuery sq;
        sq.set_ids = query_bucket_ids(q, replica);
        sq.outlier = outlier_oracle(q, radius(mode));
        return sq;
    }

    CollisionStats collision_stats(const Point& q, std::size_t replica) const {
        CollisionStats st;
        std::vector<char> seen(points_.size(), 0);
        for (SetId b : query_bucket_ids(q, replica)) {
            ++st.buckets;
            st.collisions += buckets_[b].size();
            for (ElementId p : buckets_[b]) {
                if (seen[p]) continue;
                seen[p] = 1;
                ++st.distinct;
                const double d = distance(q, p);
                if (d <= radius(Neighborhood::Exact)) ++st.within_r;
                if (d <= radius(Neighborhood::Approximate)) ++st.within_cr;
            }
        }
        return st;
    }

    /// Classic query: scan the buckets of one replica in table order and
    /// return the first point within c r; give up after 3L farther points.
    std::optional<ElementId> standard_ann_query(const Point& q, std::size_t replica = 0) const {
        const double cr = radius(Neighborhood::Approximate);
        std::size_t far = 0;
        for (SetId b : query_bucket_ids(q, replica)) {
            for (ElementId p : buckets_[b]) {
                if (distance(q, p) <= cr) return p;
                if (++far > 3 * params_.L) return std::nullopt;
            }
        }
        return std::nullopt;
    }

private:
    using Table = std::unordered_map<BucketKey, SetId, BucketKeyHash>;

    void init_tables() {
        const std::size_t tables = params_.replicas * params_.L;
        tables_.assign(tables, Table(0, BucketKeyHash{derive_seed(params_.seed, 14)}));
    }

    void build_sketches() {
        sketches_.clear();
        if (!params_.sketches) return;
        sketches_ = build_set_sketches(family_, segment_sketch_params(points_.size(),
                                                                      derive_seed(params_.seed, 15)));
    }

    LshParams params_;
    std::vector<Point> points_;
    std::size_t dim_ = 0;
    std::vector<Unit> units_;
    std::vector<Table> tables_;
    std::vector<std::vector<ElementId>> buckets_;
    std::vector<BucketKey> bucket_keys_;
    std::vector<std::uint32_t> bucket_table_;
    std::vector<SetId> point_bucket_;
    RankedFamily family_;
    std::vector<DistinctSketch> sketches_;
};

using JaccardLshIndex = LshIndex<JaccardSpace>;
using EuclideanLshIndex = LshIndex<EuclideanSpace>;

}  // namespace fairnn
