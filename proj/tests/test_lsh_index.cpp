#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fairnn/lsh_index.hpp"
#include "support.hpp"

using namespace fairnn;

namespace {

std::vector<Vector> gaussian_points(std::size_t n, std::size_t dim, double scale, std::uint64_t seed) {
    Rng gen(seed);
    std::normal_distribution<double> normal(0.0, scale);
    std::vector<Vector> pts(n, Vector(dim));
    for (auto& p : pts)
        for (auto& x : p) x = normal(gen);
    return pts;
}

// Two 20-token sets sharing `shared` tokens, offset so pairs don't overlap.
std::pair<TokenSet, TokenSet> jaccard_pair(std::uint32_t shared, std::uint32_t base) {
    TokenSet a, b;
    for (std::uint32_t i = 0; i < 20; ++i) a.push_back(base + i);
    for (std::uint32_t i = 0; i < shared; ++i) b.push_back(base + i);
    for (std::uint32_t i = shared; i < 20; ++i) b.push_back(base + 100 + i);
    return {a, normalize_tokens(b)};
}

LshParams movielens_profile(std::uint64_t seed) {
    LshParams p;
    p.k = 8;
    p.L = 100;
    p.r = JaccardSpace::radius_from_similarity(0.25);
    p.c = 1.0;
    p.seed = seed;
    p.sketches = false;
    return p;
}

}  // namespace

TEST(LshBuild, SingletonIndexHasOneBucketPerTable) {
    LshParams p;
    p.k = 3;
    p.L = 4;
    p.replicas = 2;
    p.w = 2.0;
    auto idx = EuclideanLshIndex::build({{1.0, 2.0}}, p);
    EXPECT_EQ(idx.num_tables(), 8u);
    EXPECT_EQ(idx.num_buckets(), 8u);
    for (std::size_t t = 0; t < idx.num_tables(); ++t) {
        const SetId b = idx.bucket_of_point(0, t);
        EXPECT_EQ(idx.bucket_table(b), t);
        EXPECT_EQ(idx.bucket(b), std::vector<ElementId>{0});
    }
}

TEST(LshBuild, DuplicatesAreAlwaysCoBucketed) {
    std::vector<TokenSet> pts = {{1, 2, 3}, {4, 5}, {1, 2, 3}, {9}, {1, 2, 3}};
    LshParams p;
    p.k = 6;
    p.L = 20;
    p.seed = 3;
    auto idx = JaccardLshIndex::build(pts, p);
    for (std::size_t t = 0; t < idx.num_tables(); ++t) {
        EXPECT_EQ(idx.bucket_of_point(0, t), idx.bucket_of_point(2, t));
        EXPECT_EQ(idx.bucket_of_point(0, t), idx.bucket_of_point(4, t));
    }
}

TEST(LshBuild, MnistProfileCountsAndCompleteness) {
    LshParams p;
    p.k = 15;
    p.L = 100;
    p.w = 3750;
    p.r = 1275;
    p.c = 2.0;
    p.seed = 17;
    p.sketches = false;
    const auto pts = gaussian_points(1000, 16, 600.0, 5);
    auto idx = EuclideanLshIndex::build(pts, p);
    std::vector<std::size_t> per_table(idx.num_tables(), 0);
    for (SetId b = 0; b < idx.num_buckets(); ++b) per_table[idx.bucket_table(b)] += idx.bucket(b).size();
    for (auto s : per_table) EXPECT_EQ(s, 1000u);
    for (ElementId x = 0; x < 1000; ++x) {
        for (std::size_t t = 0; t < idx.num_tables(); ++t) {
            const auto& b = idx.bucket(idx.bucket_of_point(x, t));
            ASSERT_NE(std::find(b.begin(), b.end(), x), b.end());
            ASSERT_EQ(idx.query_bucket(pts[x], t), idx.bucket_of_point(x, t));
        }
    }
    EXPECT_TRUE(idx.family().check_invariants());
}

TEST(LshBuild, RejectsBadInput) {
    LshParams p;
    EXPECT_THROW(EuclideanLshIndex::build({}, p), LshBuildError);
    EXPECT_THROW(EuclideanLshIndex::build({{1.0, 2.0}, {1.0}}, p), LshBuildError);
    p.w = 0.0;
    EXPECT_THROW(EuclideanLshIndex::build({{1.0}}, p), LshBuildError);
    p.w = 1.0;
    p.L = 0;
    EXPECT_THROW(EuclideanLshIndex::build({{1.0}}, p), LshBuildError);
}

TEST(LshBuild, BucketOrderIsShuffled) {
    // k = 1 on a tiny grid puts many points together; a shuffled bucket of
    // 200 points is essentially never sorted.
    LshParams p;
    p.k = 1;
    p.L = 1;
    p.w = 1e6;
    p.seed = 2;
    auto idx = EuclideanLshIndex::build(gaussian_points(200, 2, 1.0, 1), p);
    ASSERT_EQ(idx.num_buckets(), 1u);
    const auto& b = idx.bucket(0);
    EXPECT_FALSE(std::is_sorted(b.begin(), b.end()));
}

TEST(LshQuery, IndexedPointFindsItsBucketsWithOracle) {
    const auto pts = gaussian_points(50, 4, 1.0, 9);
    LshParams p;
    p.k = 4;
    p.L = 5;
    p.replicas = 2;
    p.w = 1.0;
    p.r = 0.5;
    p.c = 2.0;
    p.seed = 4;
    auto idx = EuclideanLshIndex::build(pts, p);
    for (std::size_t rep = 0; rep < 2; ++rep) {
        const auto ids = idx.query_bucket_ids(pts[7], rep);
        ASSERT_EQ(ids.size(), 5u);
        for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(ids[i], idx.bucket_of_point(7, rep * 5 + i));
    }
    const auto exact = idx.query_buckets(pts[7], 0, Neighborhood::Exact);
    const auto approx = idx.query_buckets(pts[7], 0, Neighborhood::Approximate);
    for (ElementId x = 0; x < 50; ++x) {
        const double d = idx.distance(pts[7], x);
        EXPECT_EQ(exact.is_outlier(x), d > 0.5);
        EXPECT_EQ(approx.is_outlier(x), d > 1.0);
    }
}

TEST(LshQuery, FarQueryMostlyMisses) {
    const auto pts = gaussian_points(100, 4, 1.0, 9);
    LshParams p;
    p.k = 12;
    p.L = 10;
    p.w = 1.0;
    p.seed = 8;
    auto idx = EuclideanLshIndex::build(pts, p);
    const Vector far(4, 1000.0);
    EXPECT_TRUE(idx.query_bucket_ids(far, 0).empty());
    EXPECT_EQ(idx.collision_stats(far, 0).distinct, 0u);
}

TEST(LshCpf, Endpoints) {
    EXPECT_DOUBLE_EQ(collision_probability(LshKind::MinHash1Bit, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(collision_probability(LshKind::MinHash1Bit, 0.0), 0.5);
    EXPECT_DOUBLE_EQ(collision_probability(LshKind::EuclideanGrid, 0.0, 4.0), 1.0);
    EXPECT_NEAR(collision_probability(LshKind::EuclideanGrid, 1e9, 1.0), 0.0, 1e-6);
    EXPECT_NEAR(table_collision_probability(LshKind::MinHash1Bit, 0.5, 3), 0.75 * 0.75 * 0.75, 1e-15);
    EXPECT_THROW(collision_probability(LshKind::MinHash1Bit, 1.5), std::domain_error);
    EXPECT_THROW(collision_probability(LshKind::MinHash1Bit, -0.1), std::domain_error);
    EXPECT_THROW(collision_probability(LshKind::EuclideanGrid, -1.0), std::domain_error);
    EXPECT_THROW(collision_probability(LshKind::EuclideanGrid, 1.0, 0.0), std::domain_error);
}

TEST(LshCpf, MonotoneOnGrid) {
    double prev_j = 0.0, prev_e = 1.0;
    for (int i = 0; i < 100; ++i) {
        const double j = collision_probability(LshKind::MinHash1Bit, i / 99.0);
        const double e = collision_probability(LshKind::EuclideanGrid, i * 0.1, 2.0);
        EXPECT_GE(j, prev_j);
        EXPECT_LE(e, prev_e);
        EXPECT_GE(e, 0.0);
        prev_j = j;
        prev_e = e;
    }
}

TEST(LshCpf, GridMatchesMonteCarlo) {
    Rng gen(21);
    LshParams p;
    p.w = 4.0;
    for (double d : {0.5, 2.0, 4.0, 10.0}) {
        Vector a(8, 0.0), b(8, 0.0);
        b[0] = d * 0.6;
        b[3] = d * 0.8;
        std::size_t hits = 0;
        const std::size_t trials = 100000;
        for (std::size_t i = 0; i < trials; ++i) {
            const GridHash h = GridHash::draw(gen, p, 8);
            hits += h(a) == h(b);
        }
        EXPECT_NEAR(static_cast<double>(hits) / trials, collision_probability(LshKind::EuclideanGrid, d, 4.0),
                    0.01)
            << "d = " << d;
    }
}

TEST(LshCpf, MinHashMatchesMonteCarlo) {
    Rng gen(22);
    LshParams p;
    for (std::uint32_t shared : {0u, 5u, 12u, 20u}) {
        const auto [a, b] = jaccard_pair(shared, 0);
        const double j = jaccard_similarity(a, b);
        std::size_t hits = 0;
        const std::size_t trials = 100000;
        for (std::size_t i = 0; i < trials; ++i) {
            const MinHashBit h = MinHashBit::draw(gen, p, 0);
            hits += h(a) == h(b);
        }
        EXPECT_NEAR(static_cast<double>(hits) / trials, collision_probability(LshKind::MinHash1Bit, j), 0.01)
            << "J = " << j;
    }
}

TEST(LshCpf, EmptySetHashesApart) {
    const MinHashBit h(1, 2);
    EXPECT_EQ(h(TokenSet{}), 2);
    const auto v = h(TokenSet{5, 6});
    EXPECT_TRUE(v == 0 || v == 1);
}

TEST(LshRecall, PlantedPairAtRadiusCollides) {
    // J = 8 / 32 = 0.25 exactly, i.e. distance r under the MovieLens profile.
    const std::size_t trials = 200;
    std::size_t collided = 0, found = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<TokenSet> pts;
        for (std::uint32_t j = 0; j < 10; ++j) {
            auto [a, b] = jaccard_pair(0, 1000 * (j + 1));
            pts.push_back(a);
        }
        const auto [q, near] = jaccard_pair(8, 0);
        ASSERT_DOUBLE_EQ(jaccard_similarity(q, near), 0.25);
        pts.push_back(near);
        auto idx = JaccardLshIndex::build(pts, movielens_profile(1000 + t));
        const ElementId target = 10;
        bool hit = false;
        for (SetId b : idx.query_bucket_ids(q, 0)) {
            const auto& m = idx.bucket(b);
            hit = hit || std::find(m.begin(), m.end(), target) != m.end();
        }
        collided += hit;
        found += idx.standard_ann_query(q).has_value();
    }
    const double floor = 0.9 - 3 * testsupport::sigma(0.9, trials);
    EXPECT_GE(static_cast<double>(collided) / trials, floor);
    EXPECT_GE(static_cast<double>(found) / trials, floor);
}

TEST(LshStandardQuery, PlantedAndEmpty) {
    auto pts = gaussian_points(30, 3, 10.0, 4);
    LshParams p;
    p.k = 2;
    p.L = 4;
    p.w = 4.0;
    p.r = 0.5;
    p.c = 2.0;
    auto idx = EuclideanLshIndex::build(pts, p);
    const auto hit = idx.standard_ann_query(pts[12]);
    ASSERT_TRUE(hit.has_value());
    EXPECT_LE(idx.distance(pts[12], *hit), 1.0);
    EXPECT_FALSE(idx.standard_ann_query(Vector{500.0, 500.0, 500.0}).has_value());
}

TEST(LshStandardQuery, StopsAfterTooManyFarPoints) {
    // 40 identical far points share every bucket with q; 3L = 3 far points
    // are tolerated, so the near point listed after them is never reached
    // unless it happens to be shuffled early.
    std::vector<Vector> pts(40, Vector{5.0});
    pts.push_back(Vector{0.0});
    LshParams p;
    p.k = 1;
    p.L = 1;
    p.w = 1e6;
    p.r = 0.1;
    p.c = 1.0;
    std::size_t misses = 0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        p.seed = s;
        auto idx = EuclideanLshIndex::build(pts, p);
        const auto& b = idx.bucket(0);
        const auto pos = static_cast<std::size_t>(std::find(b.begin(), b.end(), 40u) - b.begin());
        const bool found = idx.standard_ann_query(Vector{0.0}).has_value();
        EXPECT_EQ(found, pos <= 3);
        misses += !found;
    }
    EXPECT_GT(misses, 40u);
}

TEST(LshState, RestoreRoundTrip) {
    const auto pts = gaussian_points(80, 3, 1.0, 6);
    LshParams p;
    p.k = 3;
    p.L = 3;
    p.replicas = 2;
    p.w = 1.5;
    p.r = 0.5;
    p.c = 2.0;
    p.seed = 77;
    auto idx = EuclideanLshIndex::build(pts, p);
    idx.family().swap_ranks(3, 40);
    auto copy = EuclideanLshIndex::restore(idx.state());
    EXPECT_TRUE(copy.family() == idx.family());
    EXPECT_EQ(copy.num_buckets(), idx.num_buckets());
    for (SetId b = 0; b < idx.num_buckets(); ++b) EXPECT_EQ(copy.bucket(b), idx.bucket(b));
    for (SetId b = 0; b < idx.num_buckets(); ++b) EXPECT_TRUE(copy.sketch(b) == idx.sketch(b));
    const auto queries = gaussian_points(20, 3, 1.0, 7);
    for (const auto& q : queries) {
        for (std::size_t rep = 0; rep < 2; ++rep) {
            EXPECT_EQ(copy.query_bucket_ids(q, rep), idx.query_bucket_ids(q, rep));
            EXPECT_EQ(copy.standard_ann_query(q, rep), idx.standard_ann_query(q, rep));
        }
    }
    EXPECT_TRUE(copy.family().perturbation_rng() == idx.family().perturbation_rng());
}
