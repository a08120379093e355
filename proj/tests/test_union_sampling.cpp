#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fairnn/union_sampling.hpp"
#include "support.hpp"

using namespace fairnn;
using testsupport::iota_ids;
using testsupport::sigma;

namespace {

SubFamilyQuery all_sets(const RankedFamily& f) {
    SubFamilyQuery q;
    for (SetId s = 0; s < f.num_sets(); ++s) q.set_ids.push_back(s);
    return q;
}

std::size_t union_size(const RankedFamily& f, const SubFamilyQuery& q) {
    std::set<ElementId> u;
    for (SetId s : q.set_ids) {
        for (Rank r : f.ranks(s)) u.insert(f.ground().element_at(r));
    }
    return u.size();
}

template <class Draw>
std::vector<std::size_t> histogram(std::size_t n, std::size_t draws, Draw&& draw) {
    std::vector<std::size_t> c(n, 0);
    for (std::size_t i = 0; i < draws; ++i) {
        const SampleOutcome o = draw();
        EXPECT_TRUE(o.has_element());
        ++c[o.element];
    }
    return c;
}

double tvd_uniform_over(const std::vector<std::size_t>& c, const std::set<ElementId>& support) {
    double total = 0;
    for (auto v : c) total += static_cast<double>(v);
    double sum = 0;
    for (std::size_t x = 0; x < c.size(); ++x) {
        const double target = support.count(static_cast<ElementId>(x)) ? 1.0 / support.size() : 0.0;
        sum += std::abs(c[x] / total - target);
    }
    return sum / 2;
}

double tvd_hist(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double ta = 0, tb = 0, sum = 0;
    for (auto v : a) ta += static_cast<double>(v);
    for (auto v : b) tb += static_cast<double>(v);
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] / ta - b[i] / tb);
    return sum / 2;
}

void expect_eps_uniform(const std::vector<std::size_t>& c, std::size_t n_support, double eps,
                        std::size_t draws) {
    const double p = 1.0 / static_cast<double>(n_support);
    const double s = sigma(p, draws);
    for (std::size_t x = 0; x < c.size(); ++x) {
        const double f = c[x] / static_cast<double>(draws);
        if (c[x] == 0) continue;
        EXPECT_GE(f, p / (1 + eps) - 3 * s) << "element " << x;
        EXPECT_LE(f, p * (1 + eps) + 3 * s) << "element " << x;
    }
}

std::vector<DistinctSketch> sketches_for(const RankedFamily& f, std::uint64_t seed) {
    return build_set_sketches(f, segment_sketch_params(f.num_elements(), seed));
}

}  // namespace

// sample_dependent

TEST(Dependent, MinRankUnderIdentity) {
    auto f = RankedFamily::build_with_order({{0, 1}, {1, 2}}, iota_ids(3));
    EXPECT_EQ(sample_dependent(f, all_sets(f)).element, 0u);
    SubFamilyQuery one{{1}, {}, {}};
    EXPECT_EQ(sample_dependent(f, one).element, 1u);
}

TEST(Dependent, EmptyUnionIsNone) {
    auto f = RankedFamily::build(3, {{}, {}}, 1);
    EXPECT_EQ(sample_dependent(f, all_sets(f)).status, SampleStatus::None);
}

TEST(Dependent, RepeatsReturnSameElement) {
    auto f = RankedFamily::build(10, {{1, 2, 3}, {3, 4, 9}}, 5);
    const auto q = all_sets(f);
    const ElementId first = sample_dependent(f, q).element;
    for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_dependent(f, q).element, first);
}

TEST(Dependent, UniformOverPermutationSeeds) {
    constexpr std::size_t kSeeds = 10000;
    std::vector<std::size_t> c(8, 0);
    for (std::size_t seed = 0; seed < kSeeds; ++seed) {
        auto f = RankedFamily::build(8, {{0, 1, 2}, {2, 3, 4}, {4}}, seed);
        ++c[sample_dependent(f, all_sets(f)).element];
    }
    for (ElementId x = 0; x < 5; ++x) {
        EXPECT_NEAR(c[x] / double(kSeeds), 0.2, 3 * sigma(0.2, kSeeds));
    }
    EXPECT_EQ(c[5] + c[6] + c[7], 0u);
}

TEST(Dependent, InvalidQueryRejected) {
    auto f = RankedFamily::build(3, {{0}, {1}}, 1);
    EXPECT_THROW(sample_dependent(f, SubFamilyQuery{{0, 0}, {}, {}}), FamilyError);
    EXPECT_THROW(sample_dependent(f, SubFamilyQuery{{2}, {}, {}}), FamilyError);
}

// sample_dependent_perturb

TEST(DependentPerturb, SingleElement) {
    auto f = RankedFamily::build(1, {{0}}, 3);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_dependent_perturb(f, all_sets(f)).element, 0u);
}

TEST(DependentPerturb, RepeatsAreUniformAndPairwiseIndependent) {
    auto f = RankedFamily::build(12, {{0, 1, 2}, {2, 3}, {5, 6, 7, 8}}, 8);
    const SubFamilyQuery q{{0, 1}, {}, {}};
    constexpr std::size_t kReps = 10000;
    std::vector<std::uint32_t> seq;
    for (std::size_t i = 0; i < kReps; ++i) seq.push_back(sample_dependent_perturb(f, q).element);
    std::vector<std::size_t> c(12, 0);
    for (auto x : seq) ++c[x];
    for (ElementId x = 0; x < 4; ++x) EXPECT_NEAR(c[x] / double(kReps), 0.25, 3 * sigma(0.25, kReps));
    std::map<std::pair<ElementId, ElementId>, std::size_t> pairs;
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) ++pairs[{seq[i], seq[i + 1]}];
    const std::size_t np = seq.size() - 1;
    for (ElementId a = 0; a < 4; ++a) {
        for (ElementId b = 0; b < 4; ++b) {
            EXPECT_NEAR(pairs[std::make_pair(a, b)] / double(np), 1.0 / 16, 3 * sigma(1.0 / 16, np));
        }
    }
    EXPECT_TRUE(f.check_invariants());
}

TEST(DependentPerturb, InvariantsAfterEveryCall) {
    Rng gen(4);
    auto f = RankedFamily::build(30, testsupport::overlapping_sets(30, 6, gen), 2);
    for (int i = 0; i < 200; ++i) {
        SubFamilyQuery q{{static_cast<SetId>(i % 6), static_cast<SetId>((i + 2) % 6)}, {}, {}};
        sample_dependent_perturb(f, q);
        ASSERT_TRUE(f.check_invariants());
    }
}

// sample_exact_degree

TEST(ExactDegree, SingletonTakesOneRound) {
    auto f = RankedFamily::build(1, {{0}}, 1);
    Rng gen(1);
    auto o = sample_exact_degree(f, all_sets(f), gen);
    EXPECT_EQ(o.element, 0u);
    EXPECT_EQ(o.rounds, 1u);
}

TEST(ExactDegree, TwoOverlappingSets) {
    auto f = RankedFamily::build(3, {{0, 1}, {1, 2}}, 2);
    Rng gen(2);
    const auto q = all_sets(f);
    auto c = histogram(3, 100000, [&] { return sample_exact_degree(f, q, gen); });
    EXPECT_LE(tvd_uniform_over(c, {0, 1, 2}), 0.01);
}

TEST(ExactDegree, IdenticalSets) {
    std::vector<std::vector<ElementId>> sets(5, iota_ids(10));
    auto f = RankedFamily::build(10, sets, 3);
    Rng gen(3);
    const auto q = all_sets(f);
    auto c = histogram(10, 50000, [&] { return sample_exact_degree(f, q, gen); });
    EXPECT_GT(testsupport::chi_square_uniform_p(c), 0.001);
}

TEST(ExactDegree, RoundCapTripwire) {
    std::vector<std::vector<ElementId>> sets(20, {0});
    auto f = RankedFamily::build(1, sets, 3);
    Rng gen(3);
    SamplerConfig cfg;
    cfg.round_cap = 1;
    bool thrown = false;
    for (int i = 0; i < 50 && !thrown; ++i) {
        try {
            sample_exact_degree(f, all_sets(f), gen, cfg);
        } catch (const SamplingError&) {
            thrown = true;
        }
    }
    EXPECT_TRUE(thrown);
}

// sample_approx_degree

TEST(ApproxDegree, DisjointSetsAreExactlyUniform) {
    auto f = RankedFamily::build(6, {{0, 1}, {2, 3}, {4, 5}}, 1);
    Rng gen(5);
    const auto q = all_sets(f);
    auto c = histogram(6, 30000, [&] { return sample_approx_degree(f, q, 0.5, gen); });
    EXPECT_GT(testsupport::chi_square_uniform_p(c), 0.001);
}

TEST(ApproxDegree, TwoOverlappingSetsWithinSlack) {
    auto f = RankedFamily::build(3, {{0, 1}, {1, 2}}, 2);
    Rng gen(6);
    const auto q = all_sets(f);
    constexpr std::size_t kDraws = 100000;
    auto c = histogram(3, kDraws, [&] { return sample_approx_degree(f, q, 0.2, gen); });
    for (int x = 0; x < 3; ++x) {
        EXPECT_GE(c[x] / double(kDraws), 1.0 / (3 * 1.25));
        EXPECT_LE(c[x] / double(kDraws), 1.25 / 3);
    }
}

TEST(ApproxDegree, SmallEpsTracksExactSampler) {
    auto f = RankedFamily::build(8, {{0, 1, 2, 3}, {2, 3, 4, 5}, {5, 6, 7, 0}}, 7);
    Rng gen(7);
    const auto q = all_sets(f);
    constexpr std::size_t kDraws = 100000;
    auto approx = histogram(8, kDraws, [&] { return sample_approx_degree(f, q, 0.05, gen); });
    auto exact = histogram(8, kDraws, [&] { return sample_exact_degree(f, q, gen); });
    EXPECT_LE(tvd_hist(approx, exact), 0.02);
}

// urn lemmas

TEST(Urns, AllNonEmptyGivesOneOverG) {
    Rng gen(1);
    for (int i = 0; i < 100; ++i) {
        auto r = urn_probe_expectation(5, [](std::size_t) { return true; }, gen);
        EXPECT_DOUBLE_EQ(r.value, 0.2);
    }
}

TEST(Urns, MeanIsInverseDegree) {
    Rng gen(2);
    struct Case {
        std::size_t g, d;
        double tol;
    };
    for (const Case c : {Case{4, 2, 0.005}, Case{8, 1, 0.01}}) {
        double sum = 0;
        constexpr std::size_t kTrials = 1000000;
        for (std::size_t t = 0; t < kTrials; ++t) {
            sum += urn_probe_expectation(c.g, [&](std::size_t i) { return i < c.d; }, gen).value;
        }
        EXPECT_NEAR(sum / kTrials, 1.0 / c.d, c.tol) << "g=" << c.g << " d=" << c.d;
    }
}

TEST(Urns, DeltaPlugIn) {
    EXPECT_EQ(urn_delta(std::exp(-4.0)), 8u);
    EXPECT_EQ(urn_delta(0.01), 9u);
}

TEST(Urns, AcceptBitSingleUrnIsOneOverDelta) {
    Rng gen(3);
    const double fail = 0.01;
    constexpr std::size_t kTrials = 200000;
    std::size_t ones = 0;
    for (std::size_t t = 0; t < kTrials; ++t) {
        auto r = urn_accept_bit(1, [](std::size_t) { return true; }, fail, gen);
        EXPECT_DOUBLE_EQ(r.value, 1.0 / 9);
        ones += r.bit;
    }
    EXPECT_NEAR(ones / double(kTrials), 1.0 / 9, 3 * sigma(1.0 / 9, kTrials));
}

TEST(Urns, AcceptBitInterval) {
    Rng gen(4);
    const double fail = 0.01;
    constexpr std::size_t kTrials = 1000000;
    std::size_t ones = 0;
    for (std::size_t t = 0; t < kTrials; ++t) {
        ones += urn_accept_bit(4, [](std::size_t i) { return i < 2; }, fail, gen).bit;
    }
    const double p = ones / double(kTrials);
    const double s = sigma(1.0 / 18, kTrials);
    EXPECT_GE(p, 1.0 / 18 - fail - 3 * s);
    EXPECT_LE(p, 1.0 / 18 + 3 * s);
}

TEST(Urns, AcceptBitAllFull) {
    Rng gen(5);
    const double fail = std::exp(-4.0);
    const std::size_t g = 6;
    constexpr std::size_t kTrials = 400000;
    std::size_t ones = 0;
    for (std::size_t t = 0; t < kTrials; ++t) {
        ones += urn_accept_bit(g, [](std::size_t) { return true; }, fail, gen).bit;
    }
    const double p = ones / double(kTrials);
    const double s = sigma(1.0 / (8 * g), kTrials);
    EXPECT_GE(p, 1.0 / (8 * g) - fail - 3 * s);
    EXPECT_LE(p, 1.0 / (8 * g) + 3 * s);
}

// sample_simulation

TEST(Simulation, DisjointSetsAreUniform) {
    auto f = RankedFamily::build(6, {{0, 1}, {2, 3}, {4, 5}}, 1);
    Rng gen(8);
    const auto q = all_sets(f);
    auto c = histogram(6, 30000, [&] { return sample_simulation(f, q, 0.2, gen); });
    EXPECT_GT(testsupport::chi_square_uniform_p(c), 0.001);
}

TEST(Simulation, TwoOverlappingSetsWithinSlack) {
    auto f = RankedFamily::build(3, {{0, 1}, {1, 2}}, 2);
    Rng gen(9);
    const auto q = all_sets(f);
    constexpr std::size_t kDraws = 100000;
    auto c = histogram(3, kDraws, [&] { return sample_simulation(f, q, 0.2, gen); });
    for (int x = 0; x < 3; ++x) {
        EXPECT_GE(c[x] / double(kDraws), 0.75 / 3);
        EXPECT_LE(c[x] / double(kDraws), 1.25 / 3);
    }
}

TEST(Simulation, TracksExactSamplerOnRandomFamily) {
    Rng setup(10);
    auto f = RankedFamily::build(15, testsupport::overlapping_sets(15, 5, setup), 10);
    Rng gen(11);
    const auto q = all_sets(f);
    constexpr std::size_t kDraws = 100000;
    auto sim = histogram(15, kDraws, [&] { return sample_simulation(f, q, 0.05, gen); });
    auto exact = histogram(15, kDraws, [&] { return sample_exact_degree(f, q, gen); });
    EXPECT_LE(tvd_hist(sim, exact), 0.02);
}

// sample_rank_segment

TEST(RankSegment, SingleElementUsesTwoSegments) {
    auto f = RankedFamily::build(1, {{0}}, 1);
    auto sk = sketches_for(f, 1);
    EXPECT_EQ(segment_count_for(merged_union_estimate(all_sets(f), [&](SetId s) -> const DistinctSketch& {
                  return sk[s];
              })),
              2u);
    Rng gen(1);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_rank_segment(f, all_sets(f), sk, gen).element, 0u);
}

TEST(RankSegment, SegmentOccupancyByEnumeration) {
    auto f = RankedFamily::build_with_order({{1, 6}, {7, 12}}, iota_ids(16));
    const auto q = all_sets(f);
    const auto scan = scan_segment(f, q, 4, 1);
    EXPECT_EQ(scan.inliers, (std::vector<ElementId>{6, 7}));
    EXPECT_EQ(scan_segment(f, q, 4, 0).inliers.size(), 1u);
    EXPECT_EQ(scan_segment(f, q, 4, 2).inliers.size(), 0u);
    // lambda = 2 makes segment 1 accept with probability 1.
    SamplerConfig cfg;
    cfg.forced_k = 4;
    cfg.forced_lambda = 2;
    auto sk = sketches_for(f, 2);
    Rng gen(2);
    std::vector<std::size_t> c(16, 0);
    std::size_t accepted_first_round_in_seg1 = 0, seg1_first_round = 0;
    for (int i = 0; i < 20000; ++i) {
        Rng probe = gen;
        const bool first_is_seg1 = uniform_index(probe, 4) == 1;
        auto o = sample_rank_segment(f, q, sk, gen, cfg);
        ++c[o.element];
        if (first_is_seg1) {
            ++seg1_first_round;
            if (o.rounds == 1) ++accepted_first_round_in_seg1;
        }
    }
    EXPECT_EQ(accepted_first_round_in_seg1, seg1_first_round);
    for (ElementId x : {1u, 6u, 7u, 12u}) EXPECT_NEAR(c[x] / 20000.0, 0.25, 3 * sigma(0.25, 20000));
}

TEST(RankSegment, RandomFamilyNearUniform) {
    Rng setup(12);
    auto f = RankedFamily::build(20, testsupport::overlapping_sets(20, 6, setup), 12);
    auto sk = sketches_for(f, 12);
    Rng gen(13);
    const auto q = all_sets(f);
    ASSERT_EQ(union_size(f, q), 20u);
    std::set<ElementId> support;
    for (ElementId x = 0; x < 20; ++x) support.insert(x);
    auto c = histogram(20, 100000, [&] { return sample_rank_segment(f, q, sk, gen); });
    EXPECT_LE(tvd_uniform_over(c, support), 0.02);
}

TEST(RankSegment, OverfullSegmentRaisesFailureEvent) {
    auto f = RankedFamily::build_with_order({{0, 1, 2, 3}}, iota_ids(8));
    auto sk = sketches_for(f, 3);
    SamplerConfig cfg;
    cfg.forced_k = 2;
    cfg.forced_lambda = 2;
    Rng gen(3);
    bool thrown = false;
    for (int i = 0; i < 50 && !thrown; ++i) {
        try {
            sample_rank_segment(f, all_sets(f), sk, gen, cfg);
        } catch (const FailureEvent&) {
            thrown = true;
        }
    }
    EXPECT_TRUE(thrown);
}

// outliers: dependent

TEST(DependentOutliers, NoOutliersMatchesDependent) {
    Rng setup(14);
    auto f = RankedFamily::build(25, testsupport::overlapping_sets(25, 5, setup), 14);
    const auto q = all_sets(f);
    EXPECT_EQ(sample_dependent_outliers(f, q).element, sample_dependent(f, q).element);
}

TEST(DependentOutliers, SingleSurvivor) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto f = RankedFamily::build(10, {{0, 1, 2, 3}, {3, 4, 5}}, seed);
        SubFamilyQuery q{{0, 1}, [](ElementId x) { return x != 4; }, {}};
        auto o = sample_dependent_outliers(f, q);
        EXPECT_EQ(o.element, 4u);
    }
}

TEST(DependentOutliers, AllOutliersIsNone) {
    auto f = RankedFamily::build(4, {{0, 1}, {2}}, 1);
    SubFamilyQuery q{{0, 1}, [](ElementId) { return true; }, {}};
    auto o = sample_dependent_outliers(f, q);
    EXPECT_EQ(o.status, SampleStatus::None);
    EXPECT_EQ(o.outliers_seen, 3u);
}

TEST(DependentOutliers, UniformOverSurvivorsAcrossSeeds) {
    constexpr std::size_t kSeeds = 10000;
    std::vector<std::size_t> c(10, 0);
    for (std::size_t seed = 0; seed < kSeeds; ++seed) {
        auto f = RankedFamily::build(10, {{0, 1, 2, 3, 4}, {3, 4, 5, 6, 7, 8, 9}}, seed);
        SubFamilyQuery q{{0, 1}, [](ElementId x) { return x % 2 == 1; }, {}};
        ++c[sample_dependent_outliers(f, q).element];
    }
    for (ElementId x = 0; x < 10; x += 2) EXPECT_NEAR(c[x] / double(kSeeds), 0.2, 3 * sigma(0.2, kSeeds));
    for (ElementId x = 1; x < 10; x += 2) EXPECT_EQ(c[x], 0u);
}

TEST(PerturbOutliers, RepeatsUniformOverSurvivors) {
    auto f = RankedFamily::build(12, {{0, 1, 2, 3}, {3, 4, 5}, {8, 9}}, 3);
    SubFamilyQuery q{{0, 1}, [](ElementId x) { return x == 1 || x == 3 || x == 5; }, {}};
    constexpr std::size_t kReps = 10000;
    std::vector<std::size_t> c(12, 0);
    for (std::size_t i = 0; i < kReps; ++i) {
        ++c[sample_perturb_outliers(f, q).element];
    }
    for (ElementId x : {0u, 2u, 4u}) EXPECT_NEAR(c[x] / double(kReps), 1.0 / 3, 3 * sigma(1.0 / 3, kReps));
    EXPECT_TRUE(f.check_invariants());
}

TEST(PerturbOutliers, NoOutliersSameLawAsPerturb) {
    auto a = RankedFamily::build(9, {{0, 1, 2}, {2, 3, 4}}, 6);
    auto b = a;
    const SubFamilyQuery plain{{0, 1}, {}, {}};
    const SubFamilyQuery none{{0, 1}, [](ElementId) { return false; }, {}};
    for (int i = 0; i < 500; ++i) {
        EXPECT_EQ(sample_dependent_perturb(a, plain).element, sample_perturb_outliers(b, none).element);
    }
    EXPECT_TRUE(a == b);
}

// outliers: approximate

TEST(ApproxOutliers, ZeroBudgetStillSamplesInliers) {
    auto f = RankedFamily::build(6, {{0, 1, 2}, {2, 3, 4, 5}}, 4);
    SubFamilyQuery q{{0, 1}, [](ElementId x) { return x == 5; }, {}};
    Rng gen(4);
    std::size_t valid = 0, exceeded = 0;
    for (int i = 0; i < 2000; ++i) {
        auto o = sample_approx_outliers(f, q, 0.2, 0, gen);
        if (o.has_element()) {
            EXPECT_NE(o.element, 5u);
            ++valid;
        } else {
            EXPECT_EQ(o.status, SampleStatus::BudgetExceeded);
            ++exceeded;
        }
    }
    EXPECT_GT(valid, 0u);
    EXPECT_GT(exceeded, 0u);
}

TEST(ApproxOutliers, OnlyOutliersExceedsBudget) {
    std::vector<std::vector<ElementId>> sets{{0, 1, 2, 3}, {2, 3, 4, 5}};
    auto f = RankedFamily::build(6, sets, 5);
    SubFamilyQuery q{{0, 1}, [](ElementId) { return true; }, {}};
    Rng gen(5);
    EXPECT_EQ(sample_approx_outliers(f, q, 0.2, 5, gen).status, SampleStatus::BudgetExceeded);
    EXPECT_EQ(sample_approx_outliers(f, q, 0.2, 8, gen).status, SampleStatus::None);
}

TEST(ApproxOutliers, MixedFamilyEpsUniform) {
    Rng setup(15);
    auto f = RankedFamily::build(30, testsupport::overlapping_sets(30, 6, setup), 15);
    SubFamilyQuery q = all_sets(f);
    q.outlier = [](ElementId x) { return x % 3 == 0; };
    Rng gen(16);
    constexpr std::size_t kDraws = 100000;
    std::vector<std::size_t> c(30, 0);
    for (std::size_t i = 0; i < kDraws; ++i) {
        auto o = sample_approx_outliers(f, q, 0.2, 1000, gen);
        ASSERT_TRUE(o.has_element());
        ASSERT_NE(o.element % 3, 0u);
        ++c[o.element];
    }
    expect_eps_uniform(c, 20, 0.2, kDraws);
}

TEST(ApproxOutliers, RollbackRestoresFamily) {
    Rng setup(17);
    auto f = RankedFamily::build(40, testsupport::overlapping_sets(40, 8, setup), 17);
    const auto before = f;
    SubFamilyQuery q = all_sets(f);
    q.outlier = [](ElementId x) { return x % 2 == 0; };
    Rng gen(18);
    for (int i = 0; i < 300; ++i) {
        sample_approx_outliers(f, q, 0.1, i % 7 == 0 ? 2 : 1000, gen);
        ASSERT_TRUE(f == before);
    }
}

// outliers: segments

TEST(SegmentOutliers, NoOutliersLikeRankSegment) {
    Rng setup(19);
    auto f = RankedFamily::build(20, testsupport::overlapping_sets(20, 5, setup), 19);
    auto sk = sketches_for(f, 19);
    Rng gen(20);
    const auto q = all_sets(f);
    std::set<ElementId> support;
    for (ElementId x = 0; x < 20; ++x) support.insert(x);
    auto a = histogram(20, 40000, [&] { return sample_segment_outliers(f, q, sk, 0, gen); });
    auto b = histogram(20, 40000, [&] { return sample_rank_segment(f, q, sk, gen); });
    EXPECT_LE(tvd_uniform_over(a, support), 0.03);
    EXPECT_LE(tvd_uniform_over(b, support), 0.03);
    EXPECT_GT(testsupport::chi_square_uniform_p(a), 0.001);
}

TEST(SegmentOutliers, AllOutliers) {
    auto f = RankedFamily::build(30, {iota_ids(30)}, 21);
    auto sk = sketches_for(f, 21);
    SubFamilyQuery q{{0}, [](ElementId) { return true; }, {}};
    Rng gen(21);
    EXPECT_EQ(sample_segment_outliers(f, q, sk, 1000, gen).status, SampleStatus::None);
    EXPECT_EQ(sample_segment_outliers(f, q, sk, 0, gen).status, SampleStatus::BudgetExceeded);
}

TEST(SegmentOutliers, FewSurvivorsAmongManyOutliers) {
    Rng setup(22);
    auto f = RankedFamily::build(110, testsupport::overlapping_sets(110, 5, setup), 22);
    auto sk = sketches_for(f, 22);
    SubFamilyQuery q = all_sets(f);
    q.outlier = [](ElementId x) { return x >= 10; };
    Rng gen(23);
    std::set<ElementId> support;
    for (ElementId x = 0; x < 10; ++x) support.insert(x);
    auto c = histogram(110, 100000, [&] { return sample_segment_outliers(f, q, sk, 10000, gen); });
    EXPECT_LE(tvd_uniform_over(c, support), 0.02);
}

TEST(SegmentOutliers, HalvesDownToNoneOnEmptySurvivorSet) {
    auto f = RankedFamily::build(64, {iota_ids(64)}, 24);
    auto sk = sketches_for(f, 24);
    SubFamilyQuery q{{0}, [](ElementId) { return true; }, {}};
    SamplerConfig cfg;
    cfg.c_sigma = 0.01;
    Rng gen(24);
    auto o = sample_segment_outliers(f, q, sk, 1u << 20, gen, cfg);
    EXPECT_EQ(o.status, SampleStatus::None);
    // k starts at >= 128 and halves once per iteration until it drops below 2.
    EXPECT_GE(o.rounds, 7u);
}

// properties

TEST(Properties, ExactSamplersPassChiSquare) {
    Rng setup(30);
    for (int fam = 0; fam < 5; ++fam) {
        const std::size_t n = 10 + setup() % 41;
        const std::size_t g = 2 + setup() % 19;
        auto f = RankedFamily::build(n, testsupport::overlapping_sets(n, g, setup), 100 + fam);
        auto sk = sketches_for(f, 100 + fam);
        const auto q = all_sets(f);
        Rng gen(200 + fam);
        const std::size_t draws = 100 * n;
        auto exact = histogram(n, draws, [&] { return sample_exact_degree(f, q, gen); });
        auto seg = histogram(n, draws, [&] { return sample_rank_segment(f, q, sk, gen); });
        auto segout = histogram(n, draws, [&] { return sample_segment_outliers(f, q, sk, 0, gen); });
        EXPECT_GT(testsupport::chi_square_uniform_p(exact), 0.001) << "family " << fam;
        EXPECT_GT(testsupport::chi_square_uniform_p(seg), 0.001) << "family " << fam;
        EXPECT_GT(testsupport::chi_square_uniform_p(segout), 0.001) << "family " << fam;
    }
}

TEST(Properties, IndependentSamplersFactorizeLagOne) {
    auto f = RankedFamily::build(6, {{0, 1, 2}, {2, 3}, {3, 4, 5}}, 31);
    auto sk = sketches_for(f, 31);
    const auto q = all_sets(f);
    Rng gen(32);
    constexpr std::size_t kPairs = 100000;
    std::vector<std::uint32_t> seq;
    for (std::size_t i = 0; i <= kPairs; ++i) seq.push_back(sample_rank_segment(f, q, sk, gen).element);
    EXPECT_LE(testsupport::lag1_max_z(seq, 6), 5.0);
    seq.clear();
    for (std::size_t i = 0; i <= kPairs; ++i) seq.push_back(sample_exact_degree(f, q, gen).element);
    EXPECT_LE(testsupport::lag1_max_z(seq, 6), 5.0);
}

TEST(Overlay, RemovalCompactsActivePrefix) {
    ActivePrefixOverlay ov({4, 2});
    EXPECT_EQ(ov.total(), 6.0);
    ov.remove(0, 1);  // position 1 now holds index 3
    EXPECT_EQ(ov.active(0), 3u);
    EXPECT_EQ(ov.at(0, 0), 0u);
    EXPECT_EQ(ov.at(0, 1), 3u);
    EXPECT_EQ(ov.at(0, 2), 2u);
    ov.remove(0, 2);
    ov.remove(0, 0);
    EXPECT_EQ(ov.at(0, 0), 3u);
    ov.remove(1, 1);
    ov.remove(1, 0);
    EXPECT_EQ(ov.total(), 1.0);
    Rng gen(1);
    for (int i = 0; i < 20; ++i) {
        auto p = ov.sample(gen);
        EXPECT_EQ(p.slot, 0u);
        EXPECT_EQ(p.index, 3u);
    }
}
