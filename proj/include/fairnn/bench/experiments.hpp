#pragma once

// Experiment drivers: the per-query fairness battery, the n(q,cr)/n(q,r)
// ratio study, the clustered-neighborhood case study and query timing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <atomic>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fairnn/bench/algorithms.hpp"
#include "fairnn/bench/dataset.hpp"
#include "fairnn/bench/metrics.hpp"
#include "fairnn/bench/queries.hpp"
#include "fairnn/fair_nn.hpp"
#include "fairnn/lsf_index.hpp"
#include "fairnn/lsh_index.hpp"

namespace fairnn::bench {

struct ExperimentConfig {
    Algorithm algorithm = Algorithm::Optimal;
    LshParams lsh;                 ///< r and c in distance terms
    LsfParams lsf;                 ///< LsfFair only; thresholds are inner products
    std::size_t multiplier = 100;  ///< repeats per query = multiplier * M(q)
    std::uint64_t seed = 0;
    bool reference = true;         ///< also run Optimal for per-bin frequency deltas
    std::size_t bins = 10;
    std::size_t retry_cap = 0;     ///< 0: default_retry_cap
    std::size_t threads = 1;       ///< query-level workers; index-mutating algorithms run serially
};

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.multiplier == 0) throw std::invalid_argument("multiplier must be >= 1");
    if (cfg.bins == 0) throw std::invalid_argument("bins must be >= 1");
    if (cfg.threads == 0) throw std::invalid_argument("threads must be >= 1");
    if (cfg.algorithm != Algorithm::LsfFair) {
        if (cfg.lsh.k == 0 || cfg.lsh.L == 0 || cfg.lsh.replicas == 0) {
            throw std::invalid_argument("k, L and replicas must be positive");
        }
        if (!(cfg.lsh.r > 0.0) || !(cfg.lsh.c >= 1.0)) throw std::invalid_argument("need r > 0 and c >= 1");
        if (!(cfg.lsh.w > 0.0)) throw std::invalid_argument("w must be positive");
    }
}

struct BinDelta {
    std::size_t bin = 0;
    double lo = 0, hi = 0;  ///< distance range of the bin
    std::size_t points = 0;
    double mean_delta = 0;  ///< mean of count(algorithm) - count(Optimal)
};

struct QueryResult {
    std::size_t query_id = 0;      ///< dataset id
    std::size_t M = 0;             ///< near points among the collided ones
    std::size_t near_total = 0;    ///< n(q, r) by linear scan
    std::size_t far_total = 0;     ///< n(q, cr) by linear scan
    std::size_t repeats = 0;
    std::map<ElementId, std::size_t> counts;  ///< dataset id -> reports
    std::size_t none = 0;
    std::size_t failures = 0;
    double tvd = 0;
    std::vector<BinDelta> deltas;
    double seconds = 0;

    std::optional<double> ratio() const {
        if (near_total == 0) return std::nullopt;
        return static_cast<double>(far_total) / static_cast<double>(near_total);
    }
};

struct FairnessReport {
    Algorithm algorithm = Algorithm::Optimal;
    std::vector<QueryResult> queries;
    std::size_t skipped = 0;  ///< queries with M(q) = 0
    std::size_t failure_events = 0;
    double build_seconds = 0;

    double mean_tvd() const {
        std::vector<double> v;
        for (const auto& q : queries) v.push_back(q.tvd);
        return mean(v);
    }
    double total_seconds() const {
        double s = 0;
        for (const auto& q : queries) s += q.seconds;
        return s;
    }
};

/// JSON summary; timing fields only when asked so that reports from equal
/// seeds compare byte for byte.
inline nlohmann::json to_json(const FairnessReport& r, bool timing) {
    nlohmann::json j;
    j["algorithm"] = to_string(r.algorithm);
    j["skipped"] = r.skipped;
    j["failure_events"] = r.failure_events;
    j["mean_tvd"] = r.mean_tvd();
    auto& qs = j["queries"] = nlohmann::json::array();
    for (const auto& q : r.queries) {
        nlohmann::json e;
        e["query_id"] = q.query_id;
        e["M"] = q.M;
        e["n_r"] = q.near_total;
        e["n_cr"] = q.far_total;
        e["ratio"] = q.ratio() ? nlohmann::json(*q.ratio()) : nlohmann::json(nullptr);
        e["repeats"] = q.repeats;
        e["none"] = q.none;
        e["failures"] = q.failures;
        e["tvd"] = q.tvd;
        auto& d = e["deltas"] = nlohmann::json::array();
        for (const auto& b : q.deltas) {
            d.push_back({{"bin", b.bin}, {"lo", b.lo}, {"hi", b.hi}, {"points", b.points}, {"mean_delta", b.mean_delta}});
        }
        if (timing) e["seconds"] = q.seconds;
        qs.push_back(std::move(e));
    }
    if (timing) {
        j["build_seconds"] = r.build_seconds;
        j["query_seconds"] = r.total_seconds();
    }
    return j;
}

/// One record per (query, reported element): query_id, element_id, count.
inline std::vector<nlohmann::json> frequency_records(const FairnessReport& r) {
    std::vector<nlohmann::json> out;
    for (const auto& q : r.queries) {
        for (const auto& [x, c] : q.counts) {
            out.push_back({{"query_id", q.query_id}, {"algorithm", to_string(r.algorithm)}, {"element_id", x}, {"count", c}});
        }
    }
    return out;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Per-query RNG stream, shared by all algorithms for a fixed seed.
inline Rng query_rng(std::uint64_t seed, std::size_t qi, std::uint64_t salt) {
    return Rng(derive_seed(derive_seed(seed, 1000 + qi), salt));
}

template <class Space>
const typename Space::Point& item(const Dataset& ds, std::size_t i) {
    if constexpr (std::is_same_v<Space, JaccardSpace>) {
        return ds.sets[i];
    } else {
        return ds.vectors[i];
    }
}

template <class Space>
std::vector<typename Space::Point> items(const Dataset& ds, const std::vector<std::size_t>& ids) {
    std::vector<typename Space::Point> v;
    v.reserve(ids.size());
    for (std::size_t i : ids) v.push_back(item<Space>(ds, i));
    return v;
}

inline std::vector<BinDelta> bin_deltas(const std::map<ElementId, std::size_t>& alg,
                                        const std::map<ElementId, std::size_t>& ref,
                                        const std::vector<ElementId>& support,
                                        const std::function<double(ElementId)>& dist, double r,
                                        std::size_t bins) {
    std::vector<BinDelta> out(bins);
    for (std::size_t b = 0; b < bins; ++b) {
        out[b].bin = b;
        out[b].lo = r * static_cast<double>(b) / static_cast<double>(bins);
        out[b].hi = r * static_cast<double>(b + 1) / static_cast<double>(bins);
    }
    std::vector<double> sum(bins, 0);
    for (ElementId x : support) {
        const double d = dist(x);
        auto b = static_cast<std::size_t>(std::floor(d / r * static_cast<double>(bins)));
        b = std::min(b, bins - 1);
        const auto a = alg.count(x) ? alg.at(x) : 0;
        const auto o = ref.count(x) ? ref.at(x) : 0;
        sum[b] += static_cast<double>(a) - static_cast<double>(o);
        ++out[b].points;
    }
    std::vector<BinDelta> kept;
    for (std::size_t b = 0; b < bins; ++b) {
        if (!out[b].points) continue;
        out[b].mean_delta = sum[b] / static_cast<double>(out[b].points);
        kept.push_back(out[b]);
    }
    return kept;
}

// Runs fn(0..n-1) on up to `threads` workers; results land in per-index
// slots so the outcome does not depend on scheduling.
template <class Fn>
void for_each_query(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

inline FairnessReport collect(FairnessReport rep, std::vector<std::optional<QueryResult>> slots) {
    for (auto& r : slots) {
        if (!r) {
            ++rep.skipped;
            continue;
        }
        rep.failure_events += r->failures;
        rep.queries.push_back(std::move(*r));
    }
    return rep;
}

template <class Space>
BucketQuery bucket_query(const LshIndex<Space>& index, const typename Space::Point& q) {
    BucketQuery bq;
    bq.family = &index.family();
    bq.slots = index.query_bucket_ids(q, 0);
    bq.tables = index.params().L;
    bq.far = index.outlier_oracle(q, index.radius(Neighborhood::Exact));
    return bq;
}

// Near points in the buckets of the given replicas.
template <class Space>
std::vector<ElementId> collided_near(const LshIndex<Space>& index, const typename Space::Point& q,
                                     std::size_t replicas) {
    std::set<ElementId> s;
    const double r = index.radius(Neighborhood::Exact);
    for (std::size_t rep = 0; rep < replicas; ++rep) {
        for (SetId b : index.query_bucket_ids(q, rep)) {
            for (ElementId p : index.bucket(b)) {
                if (index.distance(q, p) <= r) s.insert(p);
            }
        }
    }
    return {s.begin(), s.end()};
}

template <class Space, class Gen>
Draw run_once(Algorithm a, LshIndex<Space>& index, const typename Space::Point& q, const BucketQuery& bq,
              Gen& gen, std::size_t cap) {
    switch (a) {
        case Algorithm::UniformUniform: return uniform_uniform(bq, gen, cap);
        case Algorithm::WeightedUniform: return weighted_uniform(bq, gen, cap);
        case Algorithm::Optimal: return optimal(bq, gen, cap);
        case Algorithm::DegreeApprox: return degree_approx(bq, gen, cap);
        case Algorithm::RankPerturb: return rank_perturb(index.family(), bq);
        case Algorithm::Naive: return naive(bq, gen);
        case Algorithm::FairNNIS: {
            Draw d;
            const auto ans = fair_nn_independent(index, q, gen);
            d.rounds = ans.diagnostics.rounds;
            if (ans.status == SampleStatus::BudgetExceeded) throw FailureEvent("outlier budget exceeded");
            if (ans.has_point()) d.point = ans.point;
            return d;
        }
        case Algorithm::LsfFair: break;
    }
    throw std::invalid_argument(to_string(a) + " does not run on an LSH index");
}

template <class Space>
FairnessReport fairness_lsh(const Dataset& ds, const QuerySelection& sel, const ExperimentConfig& cfg) {
    FairnessReport rep;
    rep.algorithm = cfg.algorithm;
    auto t0 = Clock::now();
    auto index = LshIndex<Space>::build(items<Space>(ds, sel.indexed), cfg.lsh);
    rep.build_seconds = seconds_since(t0);
    const double r = index.radius(Neighborhood::Exact);
    const double cr = index.radius(Neighborhood::Approximate);
    const std::size_t support_reps = cfg.algorithm == Algorithm::FairNNIS ? cfg.lsh.replicas : 1;
    // Reference runs get their own index copy so that RankPerturb state
    // does not leak between the two.
    std::optional<LshIndex<Space>> ref_index;
    if (cfg.reference && cfg.algorithm != Algorithm::Optimal) ref_index.emplace(index);

    std::vector<std::optional<QueryResult>> slots(sel.queries.size());
    const std::size_t threads = mutates_index(cfg.algorithm) ? 1 : cfg.threads;
    for_each_query(sel.queries.size(), threads, [&](std::size_t qi) {
        const auto& q = item<Space>(ds, sel.queries[qi]);
        QueryResult res;
        res.query_id = sel.queries[qi];
        for (ElementId p = 0; p < index.size(); ++p) {
            const double d = index.distance(q, p);
            res.near_total += d <= r;
            res.far_total += d <= cr;
        }
        const auto support = collided_near(index, q, support_reps);
        res.M = support.size();
        if (res.M == 0) return;
        res.repeats = cfg.multiplier * res.M;
        const BucketQuery bq = bucket_query(index, q);
        Rng gen = query_rng(cfg.seed, qi, 1);
        std::map<ElementId, std::size_t> local;
        const auto start = Clock::now();
        for (std::size_t i = 0; i < res.repeats; ++i) {
            try {
                const Draw d = run_once(cfg.algorithm, index, q, bq, gen, cfg.retry_cap);
                if (d.point) {
                    ++local[*d.point];
                } else {
                    ++res.none;
                }
            } catch (const FailureEvent&) {
                ++res.failures;
            } catch (const ReplicaExhausted&) {
                ++res.failures;
            } catch (const SamplingError&) {
                ++res.failures;
            }
        }
        res.seconds = seconds_since(start);
        res.tvd = tvd_to_uniform(local, support);
        if (cfg.reference) {
            std::map<ElementId, std::size_t> ref;
            if (cfg.algorithm == Algorithm::Optimal) {
                ref = local;
            } else {
                Rng rgen = query_rng(cfg.seed, qi, 2);
                const BucketQuery rbq = bucket_query(*ref_index, q);
                for (std::size_t i = 0; i < res.repeats; ++i) {
                    const Draw d = optimal(rbq, rgen, cfg.retry_cap);
                    if (d.point) ++ref[*d.point];
                }
            }
            res.deltas = bin_deltas(local, ref, support, [&](ElementId x) { return index.distance(q, x); }, r,
                                    cfg.bins);
        }
        for (const auto& [x, c] : local) res.counts[sel.indexed[x]] = c;
        slots[qi] = std::move(res);
    });
    return collect(std::move(rep), std::move(slots));
}

inline FairnessReport fairness_lsf(const Dataset& ds, const QuerySelection& sel, const ExperimentConfig& cfg) {
    if (ds.kind != DatasetKind::UnitVectors) throw std::invalid_argument("lsf-fair needs unit-vector data");
    FairnessReport rep;
    rep.algorithm = cfg.algorithm;
    LsfParams lp = cfg.lsf;
    lp.seed = cfg.seed;
    auto t0 = Clock::now();
    auto index = LsfIndex::build(items<EuclideanSpace>(ds, sel.indexed), lp);
    rep.build_seconds = seconds_since(t0);
    std::vector<std::optional<QueryResult>> slots(sel.queries.size());
    for (std::size_t qi = 0; qi < sel.queries.size(); ++qi) {
        const auto& q = ds.vectors[sel.queries[qi]];
        QueryResult res;
        res.query_id = sel.queries[qi];
        for (ElementId p = 0; p < index.size(); ++p) {
            const double s = index.similarity(q, p);
            res.near_total += s >= lp.alpha;
            res.far_total += s >= lp.beta;
        }
        std::set<ElementId> sup;
        for (std::size_t r = 0; r < index.repetitions(); ++r) {
            for (SetId b : index.query_buckets(q, r)) {
                for (ElementId p : index.bucket(b)) {
                    if (index.similarity(q, p) >= lp.alpha) sup.insert(p);
                }
            }
        }
        const std::vector<ElementId> support(sup.begin(), sup.end());
        res.M = support.size();
        if (res.M == 0) continue;
        res.repeats = cfg.multiplier * res.M;
        Rng gen = query_rng(cfg.seed, qi, 1);
        std::map<ElementId, std::size_t> local;
        t0 = Clock::now();
        for (std::size_t i = 0; i < res.repeats; ++i) {
            try {
                const auto a = lsf_fair_query(index, q, gen, cfg.retry_cap);
                if (a.has_point()) {
                    ++local[a.point];
                } else {
                    ++res.none;
                }
            } catch (const SamplingError&) {
                ++res.failures;
            }
        }
        res.seconds = seconds_since(t0);
        res.tvd = tvd_to_uniform(local, support);
        for (const auto& [x, c] : local) res.counts[sel.indexed[x]] = c;
        slots[qi] = std::move(res);
    }
    return collect(std::move(rep), std::move(slots));
}

}  // namespace detail

/// Builds the index over the non-query items, then repeats every query
/// multiplier * M(q) times and scores the reports against uniform on the
/// collided near points.
inline FairnessReport run_fairness_experiment(const Dataset& ds, const QuerySelection& sel,
                                              const ExperimentConfig& cfg) {
    validate(cfg);
    if (cfg.algorithm == Algorithm::LsfFair) return detail::fairness_lsf(ds, sel, cfg);
    if (ds.kind == DatasetKind::Sets) return detail::fairness_lsh<JaccardSpace>(ds, sel, cfg);
    return detail::fairness_lsh<EuclideanSpace>(ds, sel, cfg);
}

struct RatioRow {
    double r = 0, c = 0;
    std::size_t query_id = 0;
    std::size_t n_r = 0, n_cr = 0;
    std::optional<double> ratio;  ///< empty when n_r = 0

    bool operator==(const RatioRow&) const = default;
};

/// n(q, cr) / n(q, r) by linear scan over the indexed items. For
/// similarity thresholds the outer ball is similarity >= c * r (c <= 1).
inline std::vector<RatioRow> run_ratio_study(const Dataset& ds, const QuerySelection& sel,
                                             const std::vector<double>& radii, const std::vector<double>& factors,
                                             bool similarity) {
    std::vector<RatioRow> rows;
    for (double r : radii) {
        for (double c : factors) {
            for (std::size_t q : sel.queries) {
                RatioRow row{r, c, q, 0, 0, std::nullopt};
                for (std::size_t p : sel.indexed) {
                    if (similarity) {
                        const double s = item_similarity(ds, q, p);
                        row.n_r += s >= r;
                        row.n_cr += s >= c * r;
                    } else {
                        const double d = item_distance(ds, q, p);
                        row.n_r += d <= r;
                        row.n_cr += d <= c * r;
                    }
                }
                if (row.n_r) row.ratio = static_cast<double>(row.n_cr) / static_cast<double>(row.n_r);
                rows.push_back(row);
            }
        }
    }
    return rows;
}

// Case study: X = {16..30}, Y = {1..18}, Z = {1..27}, M = all subsets of
// Y with at least 15 elements except Y, query Q = {1..30}.

struct CaseStudyInstance {
    std::vector<TokenSet> points;  ///< X, Y, Z, then M
    TokenSet query;
    static constexpr ElementId X = 0, Y = 1, Z = 2;
};

inline CaseStudyInstance case_study_instance() {
    CaseStudyInstance inst;
    auto range = [](std::uint32_t lo, std::uint32_t hi) {
        TokenSet s;
        for (std::uint32_t i = lo; i <= hi; ++i) s.push_back(i);
        return s;
    };
    inst.points = {range(16, 30), range(1, 18), range(1, 27)};
    for (std::uint32_t mask = 0; mask < (1u << 18); ++mask) {
        const int bits = __builtin_popcount(mask);
        if (bits < 15 || bits == 18) continue;
        TokenSet s;
        for (std::uint32_t i = 0; i < 18; ++i) {
            if (mask & (1u << i)) s.push_back(i + 1);
        }
        inst.points.push_back(std::move(s));
    }
    inst.query = range(1, 30);
    return inst;
}

struct CaseStudyConfig {
    std::size_t k = 15;
    std::size_t L = 5;
    std::size_t builds = 200;
    std::size_t repeats = 100000;  ///< spread evenly over the builds
    std::size_t nnis_L = 20;
    std::size_t nnis_repeats = 2000;
    std::uint64_t seed = 0;
};

struct CaseStudyReport {
    double j_qx = 0, j_qy = 0, j_qz = 0;
    std::size_t m_sets = 0;
    std::size_t repeats = 0;
    std::size_t x = 0, y = 0, z = 0, m = 0, none = 0;
    std::map<ElementId, std::size_t> nnis_counts;  ///< FairNNIS at r = 0.9
    std::size_t nnis_none = 0;

    double p_x() const { return static_cast<double>(x) / static_cast<double>(repeats); }
    double p_y() const { return static_cast<double>(y) / static_cast<double>(repeats); }
    double p_z() const { return static_cast<double>(z) / static_cast<double>(repeats); }
};

inline nlohmann::json to_json(const CaseStudyReport& r) {
    nlohmann::json nn = nlohmann::json::object();
    for (const auto& [e, c] : r.nnis_counts) nn[std::to_string(e)] = c;
    return {{"J_QX", r.j_qx}, {"J_QY", r.j_qy}, {"J_QZ", r.j_qz}, {"M_sets", r.m_sets},
            {"repeats", r.repeats}, {"X", r.x}, {"Y", r.y}, {"Z", r.z}, {"M", r.m}, {"none", r.none},
            {"P_X", r.p_x()}, {"P_Y", r.p_y()}, {"P_Z", r.p_z()}, {"nnis_counts", nn}, {"nnis_none", r.nnis_none}};
}

/// Uniform choice among the collected points with similarity >= 0.5
/// (approximate neighborhood, r = 0.9, cr = 0.5), averaged over
/// independent index builds; then FairNNIS with the exact r = 0.9 ball.
inline CaseStudyReport run_case_study(const CaseStudyConfig& cfg = {}) {
    const auto inst = case_study_instance();
    CaseStudyReport rep;
    rep.j_qx = jaccard_similarity(inst.query, inst.points[CaseStudyInstance::X]);
    rep.j_qy = jaccard_similarity(inst.query, inst.points[CaseStudyInstance::Y]);
    rep.j_qz = jaccard_similarity(inst.query, inst.points[CaseStudyInstance::Z]);
    rep.m_sets = inst.points.size() - 3;
    const std::size_t per_build = std::max<std::size_t>(1, cfg.repeats / cfg.builds);
    LshParams p;
    p.k = cfg.k;
    p.L = cfg.L;
    p.r = JaccardSpace::radius_from_similarity(0.9);
    p.c = JaccardSpace::radius_from_similarity(0.5) / p.r;
    p.sketches = false;
    for (std::size_t b = 0; b < cfg.builds; ++b) {
        p.seed = derive_seed(cfg.seed, 5000 + b);
        const auto index = JaccardLshIndex::build(inst.points, p);
        BucketQuery bq;
        bq.family = &index.family();
        bq.slots = index.query_bucket_ids(inst.query, 0);
        bq.tables = p.L;
        bq.far = index.outlier_oracle(inst.query, index.radius(Neighborhood::Approximate));
        Rng gen(derive_seed(p.seed, 1));
        for (std::size_t i = 0; i < per_build; ++i) {
            const Draw d = naive(bq, gen);
            ++rep.repeats;
            if (!d.point) {
                ++rep.none;
            } else if (*d.point == CaseStudyInstance::X) {
                ++rep.x;
            } else if (*d.point == CaseStudyInstance::Y) {
                ++rep.y;
            } else if (*d.point == CaseStudyInstance::Z) {
                ++rep.z;
            } else {
                ++rep.m;
            }
        }
    }
    p.L = cfg.nnis_L;
    p.sketches = true;
    p.seed = derive_seed(cfg.seed, 4999);
    const auto index = JaccardLshIndex::build(inst.points, p);
    Rng gen(derive_seed(cfg.seed, 4998));
    for (std::size_t i = 0; i < cfg.nnis_repeats; ++i) {
        const auto a = fair_nn_independent(index, inst.query, gen);
        if (a.has_point()) {
            ++rep.nnis_counts[a.point];
        } else {
            ++rep.nnis_none;
        }
    }
    return rep;
}

struct TimingRow {
    Algorithm algorithm = Algorithm::Optimal;
    std::size_t runs = 0;
    double mean_seconds = 0;
    double median_seconds = 0;
};

/// Query-battery wall-clock per configuration over `runs` repetitions of
/// the full battery (index build excluded).
inline std::vector<TimingRow> run_timing(const Dataset& ds, const QuerySelection& sel,
                                         const std::vector<ExperimentConfig>& cfgs, std::size_t runs = 10) {
    std::vector<TimingRow> rows;
    for (auto cfg : cfgs) {
        cfg.reference = false;
        std::vector<double> t;
        for (std::size_t i = 0; i < runs; ++i) t.push_back(run_fairness_experiment(ds, sel, cfg).total_seconds());
        rows.push_back({cfg.algorithm, runs, mean(t), median(t)});
    }
    return rows;
}

}  // namespace fairnn::bench
