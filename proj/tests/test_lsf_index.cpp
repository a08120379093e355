#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <vector>

#include "fairnn/lsf_index.hpp"
#include "support.hpp"

using namespace fairnn;

namespace {

Vector random_unit(std::size_t d, Rng& gen) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(d);
    for (auto& x : v) x = normal(gen);
    const double n = std::sqrt(dot(v, v));
    for (auto& x : v) x /= n;
    return v;
}

// Unit vector with <p, q> = s exactly (up to rounding).
Vector at_similarity(const Vector& q, double s, Rng& gen) {
    Vector u = random_unit(q.size(), gen);
    const double proj = dot(u, q);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] -= proj * q[i];
    const double n = std::sqrt(dot(u, u));
    Vector p(q.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = s * q[i] + std::sqrt(1 - s * s) * u[i] / n;
    return p;
}

std::vector<Vector> random_units(std::size_t n, std::size_t d, Rng& gen) {
    std::vector<Vector> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(random_unit(d, gen));
    return v;
}

std::vector<ElementId> collided_near(const LsfIndex& idx, const Vector& q) {
    std::set<ElementId> s;
    for (std::size_t rep = 0; rep < idx.repetitions(); ++rep) {
        for (SetId b : idx.query_buckets(q, rep)) {
            for (ElementId p : idx.bucket(b)) {
                if (idx.similarity(q, p) >= idx.params().alpha) s.insert(p);
            }
        }
    }
    return {s.begin(), s.end()};
}

}  // namespace

TEST(LsfFormulas, Threshold) {
    LsfParams p;
    p.alpha = 0.5;
    p.eps = 1.0;
    EXPECT_DOUBLE_EQ(lsf_query_threshold(p, 3.0), 1.5);
    p.eps = std::exp(-1.0);
    EXPECT_NEAR(lsf_f(0.5, p.eps), std::sqrt(1.5), 1e-12);
    EXPECT_NEAR(lsf_f(0.5, p.eps), 1.2247, 1e-4);
    EXPECT_NEAR(lsf_query_threshold(p, 2.0), 1.0 - std::sqrt(1.5), 1e-12);
    EXPECT_NEAR(lsf_f(0.0, 0.1), std::sqrt(2 * std::log(10.0)), 1e-12);
}

TEST(LsfFormulas, PartsRhoAndDefaults) {
    EXPECT_EQ(lsf_tensor_parts(0.5), 2u);
    EXPECT_EQ(lsf_tensor_parts(0.6), 2u);
    EXPECT_EQ(lsf_tensor_parts(0.0), 1u);
    EXPECT_EQ(lsf_tensor_parts(0.8), 3u);
    EXPECT_DOUBLE_EQ(lsf_rho(0.5, 0.0), 0.75);
    EXPECT_DOUBLE_EQ(lsf_default_m(1000, 0.5, 0.0), 1000.0);
    EXPECT_NEAR(lsf_delta(9.0), std::exp(-3.0), 1e-15);
    EXPECT_GT(lsf_t_x(1024, 9.0), 0.0);
}

TEST(LsfFormulas, LowerEpsNeverShrinksCandidateFilters) {
    Rng gen(1);
    LsfParams p;
    p.alpha = 0.5;
    p.filters_per_part = 40;
    p.repetitions = 2;
    auto idx = LsfIndex::build(random_units(50, 16, gen), p);
    for (int t = 0; t < 20; ++t) {
        const Vector q = random_unit(16, gen);
        for (std::size_t rep = 0; rep < 2; ++rep) {
            auto prev = idx.above_threshold(rep, q, 0.9);
            for (double eps : {0.5, 0.2, 0.05, 0.01}) {
                const auto cur = idx.above_threshold(rep, q, eps);
                for (std::size_t i = 0; i < cur.size(); ++i) {
                    EXPECT_TRUE(std::includes(cur[i].begin(), cur[i].end(), prev[i].begin(), prev[i].end()));
                }
                prev = cur;
            }
        }
    }
}

TEST(LsfBuild, OnePointOneBucketPerRepetition) {
    Rng gen(2);
    LsfParams p;
    p.repetitions = 4;
    p.filters_per_part = 8;
    auto idx = LsfIndex::build({random_unit(5, gen)}, p);
    EXPECT_EQ(idx.num_buckets(), 4u);
    for (std::size_t rep = 0; rep < 4; ++rep) EXPECT_EQ(idx.bucket_repetition(idx.bucket_of_point(0, rep)), rep);
}

TEST(LsfBuild, DuplicatesCoBucketed) {
    Rng gen(3);
    auto pts = random_units(20, 8, gen);
    pts.push_back(pts[5]);
    LsfParams p;
    p.repetitions = 6;
    p.filters_per_part = 16;
    auto idx = LsfIndex::build(pts, p);
    for (std::size_t rep = 0; rep < 6; ++rep) EXPECT_EQ(idx.bucket_of_point(5, rep), idx.bucket_of_point(20, rep));
}

TEST(LsfBuild, ThousandPointsCountsAndArgmax) {
    Rng gen(4);
    const auto pts = random_units(1000, 32, gen);
    LsfParams p;
    p.alpha = 0.5;
    p.beta = 0.0;
    p.seed = 9;
    auto idx = LsfIndex::build(pts, p);
    EXPECT_EQ(idx.parts(), 2u);
    EXPECT_EQ(idx.filters_per_part(), 32u);  // ceil(sqrt(1000))
    EXPECT_EQ(idx.repetitions(), 10u);
    std::vector<std::size_t> occ(idx.repetitions(), 0);
    for (SetId b = 0; b < idx.num_buckets(); ++b) {
        EXPECT_FALSE(idx.bucket(b).empty());
        occ[idx.bucket_repetition(b)] += idx.bucket(b).size();
    }
    for (auto o : occ) EXPECT_EQ(o, 1000u);
    for (ElementId x = 0; x < 1000; ++x) {
        for (std::size_t rep = 0; rep < idx.repetitions(); ++rep) {
            const SetId b = idx.bucket_of_point(x, rep);
            ASSERT_EQ(idx.assign(rep, pts[x]), idx.bucket_tuple(b));
            ASSERT_NE(std::find(idx.bucket(b).begin(), idx.bucket(b).end(), x), idx.bucket(b).end());
        }
    }
}

TEST(LsfBuild, RejectsBadInput) {
    LsfParams p;
    EXPECT_THROW(LsfIndex::build({}, p), LsfBuildError);
    try {
        LsfIndex::build({{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}}, p);
        FAIL() << "non-unit point accepted";
    } catch (const LsfBuildError& e) {
        EXPECT_NE(std::string(e.what()).find("point 2"), std::string::npos);
    }
    EXPECT_THROW(LsfIndex::build({{1.0, 0.0}, {1.0}}, p), LsfBuildError);
    p.beta = 0.7;
    EXPECT_THROW(LsfIndex::build({{1.0}}, p), LsfBuildError);
    p.beta = 0.0;
    p.eps = 0.0;
    EXPECT_THROW(LsfIndex::build({{1.0}}, p), LsfBuildError);
}

TEST(LsfAnn, PlantedExactAlphaRecovered) {
    // One tensored structure (t = 2, 32 filters per part) per build.
    const double alpha = 0.6, eps = 0.2;
    const std::size_t trials = 200;
    std::size_t found = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng gen(1000 + t);
        auto pts = random_units(999, 64, gen);
        const Vector q = random_unit(64, gen);
        pts.push_back(at_similarity(q, alpha, gen));
        LsfParams p;
        p.alpha = alpha;
        p.beta = 0.59;
        p.eps = eps;
        p.filters_per_part = 32;
        p.repetitions = 1;
        p.seed = t;
        auto idx = LsfIndex::build(pts, p);
        const auto hit = lsf_ann_query(idx, q);
        found += hit && *hit == 999;
    }
    const double rate = static_cast<double>(found) / trials;
    EXPECT_GE(rate, 1 - eps - 2 * lsf_delta(9.0));
}

TEST(LsfAnn, NoPointAboveBetaIsNone) {
    Rng gen(5);
    const Vector q = random_unit(16, gen);
    std::vector<Vector> pts;
    for (int i = 0; i < 100; ++i) pts.push_back(at_similarity(q, -0.2 - 0.005 * i, gen));
    LsfParams p;
    p.alpha = 0.5;
    p.beta = 0.0;
    auto idx = LsfIndex::build(pts, p);
    EXPECT_FALSE(lsf_ann_query(idx, q).has_value());
}

TEST(LsfAnn, FarScanShrinksWithBeta) {
    Rng gen(6);
    const auto pts = random_units(2000, 16, gen);
    std::vector<Vector> queries = random_units(100, 16, gen);
    std::vector<double> mean_far;
    for (double beta : {0.3, 0.1, -0.1, -0.3}) {
        LsfParams p;
        p.alpha = 0.5;
        p.beta = beta;
        p.repetitions = 1;
        p.filters_per_part = 24;
        p.seed = 7;
        auto idx = LsfIndex::build(pts, p);
        double far = 0;
        for (const auto& q : queries) far += static_cast<double>(lsf_scan_stats(idx, q, beta).far);
        mean_far.push_back(far / queries.size());
    }
    for (std::size_t i = 1; i < mean_far.size(); ++i) EXPECT_LT(mean_far[i], mean_far[i - 1]);
}

TEST(LsfFair, SingleNearPointDegree) {
    Rng gen(7);
    const Vector q = random_unit(8, gen);
    std::vector<Vector> pts = {at_similarity(q, 0.9, gen)};
    LsfParams p;
    p.alpha = 0.5;
    p.repetitions = 5;
    p.filters_per_part = 6;
    auto idx = LsfIndex::build(pts, p);
    std::size_t reps_with = 0;
    for (std::size_t rep = 0; rep < 5; ++rep) {
        const auto ids = idx.query_buckets(q, rep);
        reps_with += std::find(ids.begin(), ids.end(), idx.bucket_of_point(0, rep)) != ids.end();
    }
    ASSERT_GT(reps_with, 0u);
    for (int i = 0; i < 30; ++i) {
        const auto a = lsf_fair_query(idx, q, gen);
        ASSERT_TRUE(a.has_point());
        EXPECT_EQ(a.point, 0u);
        EXPECT_EQ(a.degree, reps_with);
    }
}

TEST(LsfFair, SixPlantedUniformAndRestored) {
    Rng gen(8);
    const Vector q = random_unit(32, gen);
    auto pts = random_units(400, 32, gen);
    for (int i = 0; i < 40; ++i) pts.push_back(at_similarity(q, 0.3 + 0.005 * i, gen));
    for (int i = 0; i < 6; ++i) pts.push_back(at_similarity(q, 0.6, gen));
    LsfParams p;
    p.alpha = 0.6;
    p.beta = 0.2;
    p.eps = 0.2;
    p.filters_per_part = 16;
    p.seed = 3;
    auto idx = LsfIndex::build(pts, p);
    const auto support = collided_near(idx, q);
    ASSERT_EQ(support.size(), 6u);
    const auto before = idx.buckets();
    std::map<ElementId, std::size_t> freq;
    std::size_t far_removed = 0;
    for (int i = 0; i < 600; ++i) {
        const auto a = lsf_fair_query(idx, q, gen);
        ASSERT_TRUE(a.has_point());
        ASSERT_GE(a.similarity, 0.6 - 1e-9);
        far_removed += a.far_removed;
        ++freq[a.point];
        ASSERT_TRUE(idx.buckets() == before);
    }
    EXPECT_GT(far_removed, 0u);
    std::vector<std::size_t> counts;
    for (ElementId x : support) counts.push_back(freq[x]);
    EXPECT_GT(testsupport::chi_square_uniform_p(counts), 0.001);
}

TEST(LsfFair, EmptyNearSetIsNone) {
    Rng gen(9);
    const Vector q = random_unit(8, gen);
    std::vector<Vector> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(at_similarity(q, 0.4, gen));
    LsfParams p;
    p.alpha = 0.5;
    p.beta = 0.1;
    auto idx = LsfIndex::build(pts, p);
    EXPECT_EQ(lsf_fair_query(idx, q, gen).status, SampleStatus::None);
}
