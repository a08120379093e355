#pragma once

// Property checks run by the acceptance binary and `fairnn selftest`.
// Each check is self-contained, seeded, and reports one line.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "fairnn/bench/experiments.hpp"
#include "fairnn/bench/index_io.hpp"
#include "fairnn/bench/stats.hpp"
#include "fairnn/fair_nn.hpp"
#include "fairnn/lsf_index.hpp"
#include "fairnn/lsh_index.hpp"
#include "fairnn/sketches.hpp"
#include "fairnn/union_sampling.hpp"

namespace fairnn::bench {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0;
};

struct SelftestOptions {
    std::uint64_t seed = 20240601;
    /// Fewer families, draws and trials; for a quick smoke run only, the
    /// thresholds are not the acceptance ones.
    bool quick = false;
};

namespace selftest_detail {

inline std::size_t scaled(const SelftestOptions& o, std::size_t full, std::size_t quick) {
    return o.quick ? quick : full;
}

inline SubFamilyQuery all_sets(const RankedFamily& f) {
    SubFamilyQuery q;
    for (SetId s = 0; s < f.num_sets(); ++s) q.set_ids.push_back(s);
    return q;
}

// Index of x in the sorted support, or support.size() when absent.
inline std::uint32_t position(const std::vector<ElementId>& support, ElementId x) {
    return static_cast<std::uint32_t>(std::lower_bound(support.begin(), support.end(), x) - support.begin());
}

class Notes {
public:
    template <class T>
    Notes& operator<<(const T& v) {
        out_ << v;
        return *this;
    }
    void fail(const std::string& what) {
        if (failures_++ < 3) out_ << (out_.tellp() > 0 ? "; " : "") << "FAIL " << what;
    }
    bool ok() const { return failures_ == 0; }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
    std::size_t failures_ = 0;
};

// 2-d planted instance around the origin: `near` points at distance in
// [0.2, 0.9], `mid` in [1.1, 1.9], `far` in [20, 40].
struct Planted {
    std::vector<Vector> points;
};

inline Planted planted(std::size_t near, std::size_t mid, std::size_t far, Rng& gen) {
    Planted out;
    auto add = [&](double lo, double hi) {
        const double rad = lo + (hi - lo) * uniform_unit(gen);
        const double ang = 2 * std::numbers::pi * uniform_unit(gen);
        out.points.push_back({rad * std::cos(ang), rad * std::sin(ang)});
    };
    for (std::size_t i = 0; i < near; ++i) add(0.2, 0.9);
    for (std::size_t i = 0; i < mid; ++i) add(1.1, 1.9);
    for (std::size_t i = 0; i < far; ++i) add(20.0, 40.0);
    return out;
}

inline LshParams planted_params(std::size_t replicas, std::uint64_t seed) {
    LshParams p;
    p.k = 2;
    p.L = 4;
    p.replicas = replicas;
    p.w = 16.0;
    p.r = 1.0;
    p.c = 2.0;
    p.seed = seed;
    return p;
}

inline const Vector& origin() {
    static const Vector o{0.0, 0.0};
    return o;
}

inline std::vector<ElementId> collided_within(const EuclideanLshIndex& idx, const Vector& q, double radius,
                                              std::size_t rep_lo, std::size_t rep_hi) {
    std::set<ElementId> s;
    for (std::size_t rep = rep_lo; rep < rep_hi; ++rep) {
        for (SetId b : idx.query_bucket_ids(q, rep)) {
            for (ElementId p : idx.bucket(b)) {
                if (idx.distance(q, p) <= radius) s.insert(p);
            }
        }
    }
    return {s.begin(), s.end()};
}

// Frequencies of `draws` outcomes over `support` (sorted); any outcome
// outside it is reported through `stray`.
template <class Draw>
std::vector<std::size_t> tally(const std::vector<ElementId>& support, std::size_t draws, std::size_t& stray,
                               Draw&& draw) {
    std::vector<std::size_t> c(support.size(), 0);
    for (std::size_t i = 0; i < draws; ++i) {
        const std::optional<ElementId> x = draw();
        const auto pos = x ? position(support, *x) : support.size();
        if (pos < support.size() && support[pos] == *x) {
            ++c[pos];
        } else {
            ++stray;
        }
    }
    return c;
}

inline Vector random_unit(std::size_t d, Rng& gen) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(d);
    for (auto& x : v) x = normal(gen);
    const double n = std::sqrt(dot(v, v));
    for (auto& x : v) x /= n;
    return v;
}

// Unit vector at inner product exactly s with the unit vector q.
inline Vector at_similarity(const Vector& q, double s, Rng& gen) {
    Vector u = random_unit(q.size(), gen);
    const double proj = dot(u, q);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] -= proj * q[i];
    const double n = std::sqrt(dot(u, u));
    Vector p(q.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = s * q[i] + std::sqrt(1 - s * s) * u[i] / n;
    return p;
}

inline std::vector<std::uint8_t> sketch_bytes(const DistinctSketch& s) {
    std::vector<std::uint8_t> out;
    for (std::size_t w = 0; w < s.params().rows; ++w) {
        const auto r = s.row(w);
        const std::uint64_t len = r.size();
        const auto* lp = reinterpret_cast<const std::uint8_t*>(&len);
        out.insert(out.end(), lp, lp + sizeof len);
        const auto* p = reinterpret_cast<const std::uint8_t*>(r.data());
        out.insert(out.end(), p, p + r.size_bytes());
    }
    return out;
}

inline std::string fmt(double v, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << v;
    return s.str();
}

}  // namespace selftest_detail

/// 1. Exact samplers and fair_nn_independent pass chi-square vs uniform on
/// 20 random overlapping families with 100 N draws each.
inline CriterionResult check_uniformity(const SelftestOptions& o) {
    using namespace selftest_detail;
    const auto t0 = std::chrono::steady_clock::now();
    Notes notes;
    Rng setup(derive_seed(o.seed, 101));
    const std::size_t families = scaled(o, 20, 4);
    double min_p = 1.0;
    for (std::size_t fam = 0; fam < families; ++fam) {
        const std::size_t n = 10 + uniform_index(setup, 41);
        const std::size_t g = 2 + uniform_index(setup, 19);
        const auto sets = random_overlapping_family(n, g, setup);
        const auto f = RankedFamily::build(n, sets, derive_seed(o.seed, 200 + fam));
        const auto sk = build_set_sketches(f, segment_sketch_params(n, derive_seed(o.seed, 300 + fam)));
        std::vector<ElementId> all(n);
        std::iota(all.begin(), all.end(), 0u);
        const auto q = all_sets(f);
        Rng gen(derive_seed(o.seed, 400 + fam));
        auto run = [&](const char* name, const std::vector<ElementId>& support, auto&& draw) {
            std::size_t stray = 0;
            const auto c = tally(support, 100 * support.size(), stray, draw);
            const double p = chi_square_uniform_p(c);
            min_p = std::min(min_p, p);
            if (stray) notes.fail(std::string(name) + " family " + std::to_string(fam) + " stray outputs");
            if (!(p > 0.001)) notes.fail(std::string(name) + " family " + std::to_string(fam) + " p=" + fmt(p));
        };
        run("exact-degree", all, [&]() -> std::optional<ElementId> {
            const auto s = sample_exact_degree(f, q, gen);
            if (!s.has_element()) return std::nullopt;
            return s.element;
        });
        run("rank-segment", all, [&]() -> std::optional<ElementId> {
            const auto s = sample_rank_segment(f, q, sk, gen);
            if (!s.has_element()) return std::nullopt;
            return s.element;
        });
        // Every fifth element is an outlier; the budget covers all of them.
        SubFamilyQuery qo = q;
        qo.outlier = [](ElementId x) { return x % 5 == 0; };
        std::vector<ElementId> inliers;
        for (ElementId x : all) {
            if (x % 5) inliers.push_back(x);
        }
        const std::size_t omega = fairnn::detail::query_mass(f, qo);
        run("segment-outliers", inliers, [&]() -> std::optional<ElementId> {
            const auto s = sample_segment_outliers(f, qo, sk, omega, gen);
            if (!s.has_element()) return std::nullopt;
            return s.element;
        });
        // LSH instance with the same N: N near points among mid and far ones.
        const auto pl = planted(n, g, 2 * g, setup);
        const auto idx = EuclideanLshIndex::build(pl.points, planted_params(2, derive_seed(o.seed, 500 + fam)));
        const auto support = collided_within(idx, origin(), 1.0, 0, 2);
        run("fair-nn-independent", support, [&]() -> std::optional<ElementId> {
            const auto a = fair_nn_independent(idx, origin(), gen);
            if (!a.has_point()) return std::nullopt;
            return a.point;
        });
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!(secs < 120.0)) notes.fail("runtime " + fmt(secs) + " s");
    notes << (notes.ok() ? "" : "; ") << families << " families x 4 samplers, min p=" << fmt(min_p)
          << ", " << fmt(secs, 3) << " s";
    return {1, "uniformity", notes.ok(), notes.str(), secs};
}

/// 2. eps-uniform samplers keep every frequency inside
/// [(1 - 3s) / ((1 + eps) N), (1 + eps)(1 + 3s) / N] at 1e5 draws, s the
/// relative binomial sigma of 1/N.
inline CriterionResult check_eps_uniformity(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    const std::size_t draws = scaled(o, 100000, 20000);
    Rng setup(derive_seed(o.seed, 102));
    const auto sets = random_overlapping_family(24, 6, setup);
    const auto f = RankedFamily::build(24, sets, derive_seed(o.seed, 1));
    const auto q = all_sets(f);
    std::vector<ElementId> all(24);
    std::iota(all.begin(), all.end(), 0u);
    SubFamilyQuery qo = q;
    qo.outlier = [](ElementId x) { return x % 3 == 0; };
    std::vector<ElementId> inliers;
    for (ElementId x : all) {
        if (x % 3) inliers.push_back(x);
    }
    const auto pl = planted(3, 5, 40, setup);
    const auto idx = EuclideanLshIndex::build(pl.points, planted_params(3, derive_seed(o.seed, 2)));
    const auto ann_support = collided_within(idx, origin(), 2.0, 0, 3);
    double worst = 0;  // largest |relative deviation| seen
    for (double eps : {0.05, 0.2}) {
        Rng gen(derive_seed(o.seed, eps < 0.1 ? 3 : 4));
        auto run = [&](const char* name, const std::vector<ElementId>& support, auto&& draw) {
            std::size_t stray = 0;
            const auto c = tally(support, draws, stray, draw);
            const double N = static_cast<double>(support.size());
            const double s = binomial_sigma(1.0 / N, draws) * N;
            const double lo = (1 - 3 * s) / ((1 + eps) * N);
            const double hi = (1 + eps) * (1 + 3 * s) / N;
            if (stray) notes.fail(std::string(name) + " eps=" + fmt(eps) + " stray outputs");
            for (std::size_t i = 0; i < c.size(); ++i) {
                const double fr = static_cast<double>(c[i]) / static_cast<double>(draws);
                worst = std::max(worst, std::abs(fr * N - 1));
                if (fr < lo || fr > hi) {
                    notes.fail(std::string(name) + " eps=" + fmt(eps) + " element " + std::to_string(support[i]) +
                               " freq " + fmt(fr) + " outside [" + fmt(lo) + ", " + fmt(hi) + "]");
                }
            }
        };
        run("approx-degree", all, [&]() -> std::optional<ElementId> {
            const auto s = sample_approx_degree(f, q, eps, gen);
            if (!s.has_element()) return std::nullopt;
            return s.element;
        });
        run("simulation", all, [&]() -> std::optional<ElementId> {
            const auto s = sample_simulation(f, q, eps, gen);
            if (!s.has_element()) return std::nullopt;
            return s.element;
        });
        run("approx-outliers", inliers, [&]() -> std::optional<ElementId> {
            const auto s = sample_approx_outliers(f, qo, eps, 1000, gen);
            if (!s.has_element()) return std::nullopt;
            return s.element;
        });
        run("fair-ann-approx", ann_support, [&]() -> std::optional<ElementId> {
            const auto a = fair_ann_approx(idx, origin(), eps, gen);
            if (!a.has_point()) return std::nullopt;
            return a.point;
        });
    }
    notes << (notes.ok() ? "" : "; ") << "4 samplers x eps {0.05, 0.2} at " << draws
          << " draws, max |N f - 1| = " << fmt(worst);
    return {2, "eps-uniformity", notes.ok(), notes.str()};
}

/// 3. E[Y] = 1/d for the urn estimator over all (g, d) with d <= g in
/// 1..8, and the accept bit lies in [1/(d D) - fail - 3s, 1/(d D) + 3s].
inline CriterionResult check_urns(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    const std::size_t trials = scaled(o, 1000000, 100000);
    const double fail = 0.01;
    const std::size_t delta = urn_delta(fail);
    Rng gen(derive_seed(o.seed, 103));
    double worst_z = 0;
    std::size_t cases = 0;
    for (std::size_t g = 1; g <= 8; ++g) {
        for (std::size_t d = 1; d <= g; ++d) {
            ++cases;
            // Which urns are non-empty does not matter; take the first d.
            auto nonempty = [d](std::size_t i) { return i < d; };
            double sum = 0, sq = 0;
            std::size_t ones = 0;
            for (std::size_t t = 0; t < trials; ++t) {
                const double y = urn_probe_expectation(g, nonempty, gen).value;
                sum += y;
                sq += y * y;
                ones += urn_accept_bit(g, nonempty, fail, gen).bit;
            }
            const double m = sum / static_cast<double>(trials);
            const double var = std::max(0.0, sq / static_cast<double>(trials) - m * m);
            const double se = std::sqrt(var / static_cast<double>(trials));
            const double target = 1.0 / static_cast<double>(d);
            // d = g makes Y constant; then only rounding separates m from 1/d.
            const double z = se > 1e-12 ? std::abs(m - target) / se : (std::abs(m - target) < 1e-9 ? 0.0 : 1e9);
            worst_z = std::max(worst_z, z);
            if (z > 3) notes.fail("E[Y] g=" + std::to_string(g) + " d=" + std::to_string(d) + " z=" + fmt(z));
            const double pb = 1.0 / static_cast<double>(d * delta);
            const double s = binomial_sigma(pb, trials);
            const double p = static_cast<double>(ones) / static_cast<double>(trials);
            if (p < pb - fail - 3 * s || p > pb + 3 * s) {
                notes.fail("accept bit g=" + std::to_string(g) + " d=" + std::to_string(d) + " p=" + fmt(p));
            }
        }
    }
    notes << (notes.ok() ? "" : "; ") << cases << " (g, d) pairs at " << trials
          << " trials, max z = " << fmt(worst_z);
    return {3, "urn-lemma", notes.ok(), notes.str()};
}

/// 4. Lag-1 joint factorization within 5 sigma at 1e5 consecutive pairs.
/// Exact samplers are tested against the uniform product; eps-uniform
/// ones against the product of their own empirical marginals. The
/// dependent min-rank sampler must fail.
inline CriterionResult check_independence(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    const std::size_t pairs = scaled(o, 100000, 20000);
    const auto f = RankedFamily::build(6, {{0, 1, 2}, {2, 3}, {3, 4, 5}}, derive_seed(o.seed, 104));
    const auto sk = build_set_sketches(f, segment_sketch_params(6, derive_seed(o.seed, 105)));
    const auto q = all_sets(f);
    SubFamilyQuery qo = q;
    qo.outlier = [](ElementId x) { return x == 4; };
    std::vector<ElementId> all6{0, 1, 2, 3, 4, 5}, in5{0, 1, 2, 3, 5};
    Rng setup(derive_seed(o.seed, 106));
    const auto pl = planted(6, 6, 30, setup);
    const auto idx = EuclideanLshIndex::build(pl.points, planted_params(2, derive_seed(o.seed, 107)));
    const auto near = collided_within(idx, origin(), 1.0, 0, 2);
    const auto ann = collided_within(idx, origin(), 2.0, 0, 2);
    Rng lsf_setup(derive_seed(o.seed, 108));
    const Vector lq = random_unit(16, lsf_setup);
    std::vector<Vector> lpts;
    for (int i = 0; i < 100; ++i) lpts.push_back(random_unit(16, lsf_setup));
    for (int i = 0; i < 10; ++i) lpts.push_back(at_similarity(lq, 0.35, lsf_setup));
    for (int i = 0; i < 5; ++i) lpts.push_back(at_similarity(lq, 0.7, lsf_setup));
    LsfParams lp;
    lp.alpha = 0.7;
    lp.beta = 0.3;
    lp.filters_per_part = 8;
    lp.seed = derive_seed(o.seed, 109);
    auto lsf = LsfIndex::build(lpts, lp);
    std::set<ElementId> lsf_near;
    for (std::size_t r = 0; r < lsf.repetitions(); ++r) {
        for (SetId b : lsf.query_buckets(lq, r)) {
            for (ElementId p : lsf.bucket(b)) {
                if (lsf.similarity(lq, p) >= lp.alpha) lsf_near.insert(p);
            }
        }
    }
    const std::vector<ElementId> lsf_support(lsf_near.begin(), lsf_near.end());

    Rng gen(derive_seed(o.seed, 110));
    std::vector<std::string> lines;
    auto run = [&](const std::string& name, const std::vector<ElementId>& support, bool exact, auto&& draw) {
        std::vector<std::uint32_t> seq;
        seq.reserve(pairs + 1);
        for (std::size_t i = 0; i <= pairs; ++i) {
            const std::optional<ElementId> x = draw();
            const auto pos = x ? position(support, *x) : static_cast<std::uint32_t>(support.size());
            if (pos >= support.size() || support[pos] != *x) {
                notes.fail(name + " stray output");
                return -1.0;
            }
            seq.push_back(pos);
        }
        const auto m = exact ? std::vector<double>(support.size(), 1.0 / static_cast<double>(support.size()))
                             : empirical_marginal(seq, support.size());
        const double z = lag1_max_z(seq, m);
        lines.push_back(name + " " + fmt(z, 3));
        return z;
    };
    auto elem = [](const SampleOutcome& s) -> std::optional<ElementId> {
        if (!s.has_element()) return std::nullopt;
        return s.element;
    };
    auto point = [](const auto& a) -> std::optional<ElementId> {
        if (!a.has_point()) return std::nullopt;
        return a.point;
    };
    struct Item {
        std::string name;
        std::function<double()> run;
    };
    const std::vector<Item> items = {
        {"exact-degree", [&] { return run("exact-degree", all6, true, [&] { return elem(sample_exact_degree(f, q, gen)); }); }},
        {"rank-segment", [&] { return run("rank-segment", all6, true, [&] { return elem(sample_rank_segment(f, q, sk, gen)); }); }},
        {"segment-outliers", [&] { return run("segment-outliers", in5, true, [&] { return elem(sample_segment_outliers(f, qo, sk, 100, gen)); }); }},
        {"approx-degree", [&] { return run("approx-degree", all6, false, [&] { return elem(sample_approx_degree(f, q, 0.2, gen)); }); }},
        {"simulation", [&] { return run("simulation", all6, false, [&] { return elem(sample_simulation(f, q, 0.2, gen)); }); }},
        {"approx-outliers", [&] { return run("approx-outliers", in5, false, [&] { return elem(sample_approx_outliers(f, qo, 0.2, 100, gen)); }); }},
        {"fair-nn-independent", [&] { return run("fair-nn-independent", near, true, [&] { return point(fair_nn_independent(idx, origin(), gen)); }); }},
        {"fair-nn-independent-whp", [&] { return run("fair-nn-independent-whp", near, true, [&] { return point(fair_nn_independent_whp(idx, origin(), gen)); }); }},
        {"fair-ann-approx", [&] { return run("fair-ann-approx", ann, false, [&] { return point(fair_ann_approx(idx, origin(), 0.2, gen)); }); }},
        {"lsf-fair", [&] { return run("lsf-fair", lsf_support, true, [&] { return point(lsf_fair_query(lsf, lq, gen)); }); }},
    };
    double worst = 0;
    for (const auto& it : items) {
        const double z = it.run();
        if (z < 0) continue;
        worst = std::max(worst, z);
        if (z > 5) notes.fail(it.name + " z=" + fmt(z));
    }
    // Negative control: a constant sequence against the uniform product.
    const double zdep = run("dependent (control)", all6, true, [&] { return elem(sample_dependent(f, q)); });
    if (!(zdep > 5)) notes.fail("dependent sampler passed the factorization test");
    notes << (notes.ok() ? "" : "; ") << items.size() << " samplers at " << pairs << " pairs, max z = " << fmt(worst)
          << "; dependent control z = " << fmt(zdep);
    return {4, "independence", notes.ok(), notes.str()};
}

/// 5. Distinct-count sketch within (1 +- 0.5) in >= 1 - 2 fail of 200
/// seeded trials at F0 in {3, 500, 1e4}; merged halves equal the
/// single-stream sketch byte for byte.
inline CriterionResult check_sketches(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    const double eps = 0.5, fail = 0.01;
    const std::size_t trials = 200;
    const std::size_t need = static_cast<std::size_t>(std::ceil((1 - 2 * fail) * trials));
    for (std::size_t f0 : {std::size_t{3}, std::size_t{500}, std::size_t{10000}}) {
        std::size_t within = 0;
        for (std::size_t t = 0; t < trials; ++t) {
            DistinctSketch sk(SketchParams::for_accuracy(eps, fail, derive_seed(o.seed, 5000 + t)));
            Rng rng(derive_seed(o.seed, 6000 + t));
            std::unordered_set<std::uint64_t> seen;
            while (seen.size() < f0) {
                const std::uint64_t x = rng() % (100 * f0);
                seen.insert(x);
                sk.insert(x);
                if (seen.size() % 2) sk.insert(x);  // repeats must not count
            }
            const double e = sk.estimate();
            within += e >= (1 - eps) * static_cast<double>(f0) && e <= (1 + eps) * static_cast<double>(f0);
        }
        notes << (f0 == 3 ? "" : ", ") << "F0=" << f0 << ": " << within << "/" << trials;
        if (within < need) notes.fail("F0=" + std::to_string(f0) + " only " + std::to_string(within) + " within");
    }
    std::size_t merge_ok = 0;
    const std::size_t merge_trials = 20;
    for (std::size_t t = 0; t < merge_trials; ++t) {
        const auto p = SketchParams::for_accuracy(eps, fail, derive_seed(o.seed, 7000 + t));
        Rng rng(derive_seed(o.seed, 8000 + t));
        std::vector<std::uint64_t> stream(2000);
        for (auto& x : stream) x = rng() % 1500;
        const std::size_t cut = uniform_index(rng, stream.size() + 1);
        DistinctSketch whole(p), left(p), right(p);
        for (std::size_t i = 0; i < stream.size(); ++i) {
            whole.insert(stream[i]);
            (i < cut ? left : right).insert(stream[i]);
        }
        merge_ok += sketch_bytes(merge(left, right)) == sketch_bytes(whole);
    }
    notes << "; merge byte-equal " << merge_ok << "/" << merge_trials << " (need >= " << need << "/" << trials << ")";
    if (merge_ok != merge_trials) notes.fail("merge differs from the single-stream sketch");
    return {5, "sketches", notes.ok(), notes.str()};
}

/// 6. A planted pair at exactly the MovieLens radius (J = 0.25, k = 8,
/// L = 100) collides in >= 90% - 3 sigma of 200 builds; unit-hash
/// collision rates match the closed forms within 0.01.
inline CriterionResult check_lsh_calibration(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    // Two 20-token sets sharing `shared` tokens.
    auto pair = [](std::uint32_t shared, std::uint32_t base) {
        TokenSet a, b;
        for (std::uint32_t i = 0; i < 20; ++i) a.push_back(base + i);
        for (std::uint32_t i = 0; i < shared; ++i) b.push_back(base + i);
        for (std::uint32_t i = shared; i < 20; ++i) b.push_back(base + 100 + i);
        return std::pair{a, normalize_tokens(b)};
    };
    const std::size_t trials = scaled(o, 200, 50);
    const auto profile = dataset_profile("movielens");
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<TokenSet> pts;
        for (std::uint32_t j = 0; j < 10; ++j) pts.push_back(pair(0, 1000 * (j + 1)).first);
        const auto [q, near] = pair(8, 0);
        pts.push_back(near);
        LshParams p;
        p.k = profile.k;
        p.L = profile.L;
        p.r = profile.r;
        p.c = 1.0;
        p.sketches = false;
        p.seed = derive_seed(o.seed, 600 + t);
        const auto idx = JaccardLshIndex::build(pts, p);
        bool hit = false;
        for (SetId b : idx.query_bucket_ids(q, 0)) {
            const auto& m = idx.bucket(b);
            hit = hit || std::find(m.begin(), m.end(), ElementId{10}) != m.end();
        }
        hits += hit;
    }
    const double rate = static_cast<double>(hits) / static_cast<double>(trials);
    const double floor = 0.9 - 3 * binomial_sigma(0.9, trials);
    notes << "planted J=0.25 collides " << fmt(rate) << " (floor " << fmt(floor) << ")";
    if (rate < floor) notes.fail("recall " + fmt(rate));

    const std::size_t cpf_trials = scaled(o, 100000, 20000);
    Rng gen(derive_seed(o.seed, 601));
    double worst = 0;
    LshParams gp;
    gp.w = 4.0;
    for (double d : {0.5, 2.0, 4.0, 10.0}) {
        Vector a(8, 0.0), b(8, 0.0);
        b[0] = d * 0.6;
        b[3] = d * 0.8;
        std::size_t h = 0;
        for (std::size_t i = 0; i < cpf_trials; ++i) {
            const GridHash u = GridHash::draw(gen, gp, 8);
            h += u(a) == u(b);
        }
        const double dev = std::abs(static_cast<double>(h) / static_cast<double>(cpf_trials) -
                                    collision_probability(LshKind::EuclideanGrid, d, gp.w));
        worst = std::max(worst, dev);
        if (dev > 0.01) notes.fail("grid cpf at d=" + fmt(d));
    }
    for (std::uint32_t shared : {0u, 5u, 12u, 20u}) {
        const auto [a, b] = pair(shared, 0);
        const double j = jaccard_similarity(a, b);
        std::size_t h = 0;
        for (std::size_t i = 0; i < cpf_trials; ++i) {
            const MinHashBit u = MinHashBit::draw(gen, gp, 0);
            h += u(a) == u(b);
        }
        const double dev = std::abs(static_cast<double>(h) / static_cast<double>(cpf_trials) -
                                    collision_probability(LshKind::MinHash1Bit, j));
        worst = std::max(worst, dev);
        if (dev > 0.01) notes.fail("minhash cpf at J=" + fmt(j));
    }
    notes << "; max cpf deviation " << fmt(worst);
    return {6, "lsh-calibration", notes.ok(), notes.str()};
}

/// 7. LSF: exact-alpha planted point recovered in >= 1 - eps - 2 delta -
/// 3 sigma of 500 single-structure builds; lsf_fair_query uniform on six
/// planted near points; buckets restored exactly after every query.
inline CriterionResult check_lsf(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    const double alpha = 0.6, eps = 0.2;
    const std::size_t trials = scaled(o, 500, 60);
    std::size_t found = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng gen(derive_seed(o.seed, 700 + t));
        std::vector<Vector> pts;
        for (int i = 0; i < 999; ++i) pts.push_back(random_unit(64, gen));
        const Vector q = random_unit(64, gen);
        pts.push_back(at_similarity(q, alpha, gen));
        LsfParams p;
        p.alpha = alpha;
        p.beta = 0.59;
        p.eps = eps;
        p.filters_per_part = 32;
        p.repetitions = 1;
        p.seed = derive_seed(o.seed, 7000 + t);
        const auto idx = LsfIndex::build(pts, p);
        const auto hit = lsf_ann_query(idx, q);
        found += hit && *hit == 999;
    }
    const double delta = lsf_delta(LsfParams{}.kappa);
    const double rate = static_cast<double>(found) / static_cast<double>(trials);
    const double target = 1 - eps - 2 * delta;
    const double floor = target - 3 * binomial_sigma(target, trials);
    notes << "recovery " << fmt(rate) << " (floor " << fmt(floor) << ")";
    if (rate < floor) notes.fail("recovery below floor");

    Rng gen(derive_seed(o.seed, 701));
    const Vector q = random_unit(32, gen);
    std::vector<Vector> pts;
    for (int i = 0; i < 400; ++i) pts.push_back(random_unit(32, gen));
    for (int i = 0; i < 40; ++i) pts.push_back(at_similarity(q, 0.3 + 0.005 * i, gen));
    for (int i = 0; i < 6; ++i) pts.push_back(at_similarity(q, 0.65, gen));
    LsfParams p;
    p.alpha = 0.6;
    p.beta = 0.2;
    p.eps = 0.2;
    p.filters_per_part = 16;
    p.seed = derive_seed(o.seed, 702);
    auto idx = LsfIndex::build(pts, p);
    std::set<ElementId> near;
    for (std::size_t r = 0; r < idx.repetitions(); ++r) {
        for (SetId b : idx.query_buckets(q, r)) {
            for (ElementId x : idx.bucket(b)) {
                if (idx.similarity(q, x) >= p.alpha) near.insert(x);
            }
        }
    }
    const std::vector<ElementId> support(near.begin(), near.end());
    if (support.size() != 6) notes.fail("expected 6 collided near points, got " + std::to_string(support.size()));
    const auto before = idx.buckets();
    std::size_t stray = 0, restored = 0, far_removed = 0;
    const std::size_t draws = 100 * std::max<std::size_t>(support.size(), 1);
    const auto c = tally(support, draws, stray, [&]() -> std::optional<ElementId> {
        const auto a = lsf_fair_query(idx, q, gen);
        restored += idx.buckets() == before;
        far_removed += a.far_removed;
        if (!a.has_point()) return std::nullopt;
        return a.point;
    });
    const double pval = chi_square_uniform_p(c);
    notes << "; fair query p=" << fmt(pval) << ", far removed " << far_removed << ", restored " << restored << "/"
          << draws;
    if (stray) notes.fail("fair query returned points outside the near set");
    if (!(pval > 0.001)) notes.fail("fair query chi-square");
    if (restored != draws) notes.fail("buckets not restored");
    return {7, "lsf", notes.ok(), notes.str()};
}

/// 8. Case study: exact similarities, P(X) >= 10 P(Y) at 1e5 repeats,
/// FairNNIS at r = 0.9 returns only Z.
inline CriterionResult check_case_study(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    CaseStudyConfig cfg;
    cfg.seed = derive_seed(o.seed, 800);
    cfg.repeats = scaled(o, 100000, 20000);
    cfg.builds = scaled(o, 200, 40);
    const auto r = run_case_study(cfg);
    if (r.j_qz != 0.9 || r.j_qy != 0.6 || r.j_qx != 0.5) notes.fail("similarities differ");
    const double px = r.p_x(), py = r.p_y();
    notes << "J(Q,Z)=" << r.j_qz << " J(Q,Y)=" << r.j_qy << " J(Q,X)=" << r.j_qx << ", |M|=" << r.m_sets
          << "; P(X)=" << fmt(px) << " P(Y)=" << fmt(py) << " P(Z)=" << fmt(r.p_z()) << " over " << r.repeats;
    if (!(px >= 10 * py)) notes.fail("P(X) < 10 P(Y)");
    std::size_t z = 0, other = 0;
    for (const auto& [e, c] : r.nnis_counts) (e == CaseStudyInstance::Z ? z : other) += c;
    notes << "; FairNNIS Z=" << z << " other=" << other << " none=" << r.nnis_none;
    if (other || z == 0) notes.fail("FairNNIS output outside {Z}");
    return {8, "case-study", notes.ok(), notes.str()};
}

/// Synthetic workload with heterogeneous degrees: per query a tight
/// cluster of near points sharing buckets, isolated near points at spread
/// distances, and a shell of points just beyond c r.
inline Dataset heterogeneous_workload(std::size_t queries, std::uint64_t seed, QuerySelection& sel) {
    Rng gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t dim = 4;
    Dataset ds;
    ds.kind = DatasetKind::Vectors;
    ds.name = "heterogeneous";
    ds.dim = dim;
    auto direction = [&] {
        Vector v(dim);
        for (auto& x : v) x = normal(gen);
        const double n = std::sqrt(dot(v, v));
        for (auto& x : v) x /= n;
        return v;
    };
    auto at = [&](const Vector& c, const Vector& dir, double d) {
        Vector v(dim);
        for (std::size_t i = 0; i < dim; ++i) v[i] = c[i] + d * dir[i];
        return v;
    };
    for (std::size_t qi = 0; qi < queries; ++qi) {
        Vector c(dim, 0.0);
        c[0] = 1000.0 * static_cast<double>(qi);
        sel.queries.push_back(ds.vectors.size());
        ds.vectors.push_back(c);
        const Vector hub = at(c, direction(), 0.4);
        for (int i = 0; i < 20; ++i) ds.vectors.push_back(at(hub, direction(), 0.02 * uniform_unit(gen)));
        for (int i = 0; i < 12; ++i) ds.vectors.push_back(at(c, direction(), 0.1 + 0.85 * uniform_unit(gen)));
        for (int i = 0; i < 40; ++i) ds.vectors.push_back(at(c, direction(), 2.2 + 2.0 * uniform_unit(gen)));
    }
    std::vector<char> is_query(ds.vectors.size(), 0);
    for (auto q : sel.queries) is_query[q] = 1;
    for (std::size_t i = 0; i < ds.vectors.size(); ++i) {
        if (!is_query[i]) sel.indexed.push_back(i);
    }
    sel.eligible = queries;
    return ds;
}

inline LshParams heterogeneous_params(std::uint64_t seed) {
    LshParams p;
    p.k = 3;
    p.L = 20;
    p.w = 2.0;
    p.r = 1.0;
    p.c = 2.0;
    p.seed = seed;
    return p;
}

/// 9. Mean TVD ordering UU > WU > DA > Optimal (each step allowed 0.01 of
/// overlap) and |RankPerturb - Optimal| <= 0.02.
inline CriterionResult check_fairness_ordering(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    QuerySelection sel;
    const auto ds = heterogeneous_workload(scaled(o, 10, 4), derive_seed(o.seed, 900), sel);
    std::map<Algorithm, double> tvd;
    for (Algorithm a : {Algorithm::UniformUniform, Algorithm::WeightedUniform, Algorithm::DegreeApprox,
                        Algorithm::Optimal, Algorithm::RankPerturb}) {
        ExperimentConfig cfg;
        cfg.algorithm = a;
        cfg.lsh = heterogeneous_params(derive_seed(o.seed, 901));
        cfg.seed = derive_seed(o.seed, 902);
        cfg.reference = false;
        const auto rep = run_fairness_experiment(ds, sel, cfg);
        tvd[a] = rep.mean_tvd();
        notes << (a == Algorithm::UniformUniform ? "" : " ") << to_string(a) << "=" << fmt(tvd[a], 3);
        if (rep.queries.empty()) notes.fail("no query with collided near points");
    }
    const double tol = 0.01;
    if (!(tvd[Algorithm::UniformUniform] > tvd[Algorithm::WeightedUniform] - tol)) notes.fail("UU <= WU");
    if (!(tvd[Algorithm::WeightedUniform] > tvd[Algorithm::DegreeApprox] - tol)) notes.fail("WU <= DA");
    if (!(tvd[Algorithm::DegreeApprox] > tvd[Algorithm::Optimal] - tol)) notes.fail("DA <= Optimal");
    if (!(std::abs(tvd[Algorithm::RankPerturb] - tvd[Algorithm::Optimal]) <= 0.02)) {
        notes.fail("|RankPerturb - Optimal| > 0.02");
    }
    return {9, "fairness-ordering", notes.ok(), notes.str()};
}

/// 10. Same seed, same report (timing excluded), regardless of thread
/// count; saved indexes reload with identical query behavior.
inline CriterionResult check_determinism(const SelftestOptions& o) {
    using namespace selftest_detail;
    Notes notes;
    QuerySelection sel;
    const auto ds = heterogeneous_workload(4, derive_seed(o.seed, 1000), sel);
    for (Algorithm a : {Algorithm::Optimal, Algorithm::RankPerturb, Algorithm::FairNNIS, Algorithm::DegreeApprox}) {
        ExperimentConfig cfg;
        cfg.algorithm = a;
        cfg.lsh = heterogeneous_params(derive_seed(o.seed, 1001));
        cfg.lsh.replicas = 2;
        cfg.multiplier = 20;
        cfg.seed = derive_seed(o.seed, 1002);
        const auto one = to_json(run_fairness_experiment(ds, sel, cfg), false).dump();
        const auto two = to_json(run_fairness_experiment(ds, sel, cfg), false).dump();
        cfg.threads = 3;
        const auto three = to_json(run_fairness_experiment(ds, sel, cfg), false).dump();
        if (one != two) notes.fail(to_string(a) + " reports differ across runs");
        if (one != three) notes.fail(to_string(a) + " reports depend on thread count");
    }
    notes << "fairness reports byte-identical for 4 algorithms";

    // Save, load, and compare bucket lookups plus seeded query streams.
    std::vector<Vector> pts;
    for (auto i : sel.indexed) pts.push_back(ds.vectors[i]);
    auto params = heterogeneous_params(derive_seed(o.seed, 1003));
    params.replicas = 2;
    auto original = EuclideanLshIndex::build(pts, params);
    // Advance the perturbation state first so that it is part of the file.
    for (std::size_t i = 0; i < 5; ++i) fair_nn_dependent(original, ds.vectors[sel.queries[0]]);
    std::stringstream file;
    save_index(file, original);
    const std::string bytes = file.str();
    auto loaded = load_index<EuclideanSpace>(file);
    std::stringstream again;
    save_index(again, loaded);
    if (again.str() != bytes) notes.fail("save(load(file)) differs from file");
    std::size_t compared = 0;
    for (auto qid : sel.queries) {
        const auto& q = ds.vectors[qid];
        for (std::size_t rep = 0; rep < params.replicas; ++rep) {
            if (original.query_bucket_ids(q, rep) != loaded.query_bucket_ids(q, rep)) notes.fail("bucket ids differ");
        }
        Rng g1(derive_seed(o.seed, 1004 + qid)), g2(derive_seed(o.seed, 1004 + qid));
        for (int i = 0; i < 200; ++i) {
            const auto a = fair_nn_independent(original, q, g1);
            const auto b = fair_nn_independent(loaded, q, g2);
            const auto c = fair_nn_dependent(original, q);
            const auto d = fair_nn_dependent(loaded, q);
            ++compared;
            if (a.status != b.status || a.point != b.point || c.status != d.status || c.point != d.point) {
                notes.fail("query results differ after reload");
                break;
            }
        }
    }
    notes << "; index file " << bytes.size() << " bytes, " << compared << " query pairs identical after reload";
    return {10, "determinism", notes.ok(), notes.str()};
}

inline const std::vector<std::function<CriterionResult(const SelftestOptions&)>>& selftest_checks() {
    static const std::vector<std::function<CriterionResult(const SelftestOptions&)>> v = {
        check_uniformity, check_eps_uniformity, check_urns,           check_independence,
        check_sketches,   check_lsh_calibration, check_lsf,           check_case_study,
        check_fairness_ordering, check_determinism,
    };
    return v;
}

/// Runs the selected checks (all when `only` is empty). Exceptions count
/// as failures.
inline std::vector<CriterionResult> run_selftest(const SelftestOptions& o, const std::set<int>& only = {},
                                                 const std::function<void(const CriterionResult&)>& each = {}) {
    std::vector<CriterionResult> out;
    const auto& checks = selftest_checks();
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        CriterionResult r;
        try {
            r = checks[i](o);
        } catch (const std::exception& e) {
            r = {id, "criterion " + std::to_string(id), false, std::string("exception: ") + e.what()};
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (each) each(r);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fairnn::bench
