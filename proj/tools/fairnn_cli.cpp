// fairnn: build and query LSH indexes, and run the fairness benchmarks.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairnn.hpp"

using namespace fairnn;
using namespace fairnn::bench;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitFailureEvent = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Rows of named columns, printed as CSV (with a header) or JSON lines.
class Table {
public:
    Table(std::string format, std::vector<std::string> columns)
        : csv_(format == "csv"), columns_(std::move(columns)) {}

    void add(json row) { rows_.push_back(std::move(row)); }

    void print(std::ostream& out) const {
        if (csv_) {
            for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
            out << '\n';
        }
        for (const auto& row : rows_) {
            if (!csv_) {
                out << row.dump() << '\n';
                continue;
            }
            for (std::size_t i = 0; i < columns_.size(); ++i) {
                if (i) out << ',';
                out << cell(row.contains(columns_[i]) ? row[columns_[i]] : json());
            }
            out << '\n';
        }
    }

private:
    static std::string cell(const json& v) {
        if (v.is_null()) return "";
        if (!v.is_string()) return v.dump();
        const auto& s = v.get_ref<const std::string&>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) {
            if (ch == '"') q += '"';
            q += ch;
        }
        return q + "\"";
    }

    bool csv_;
    std::vector<std::string> columns_;
    std::vector<json> rows_;
};

struct Output {
    std::string format = "csv";
    std::string path;

    void emit(const Table& t) const {
        if (path.empty() || path == "-") {
            t.print(std::cout);
            return;
        }
        std::ofstream out(path);
        if (!out) throw UsageError("cannot open '" + path + "' for writing");
        t.print(out);
    }
};

void add_output(CLI::App* cmd, Output& o) {
    cmd->add_option("--format", o.format, "Tabular output format")->check(CLI::IsMember({"csv", "jsonl"}));
    cmd->add_option("-o,--out", o.path, "Output file (default stdout)");
}

struct DataOptions {
    std::string path;
    std::string format = "sets";
    bool unit = false;
};

void add_data(CLI::App* cmd, DataOptions& d) {
    cmd->add_option("--data", d.path, "Dataset file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--input-format", d.format, "sets | csv | fvecs");
    cmd->add_flag("--unit", d.unit, "Normalize vectors to unit length");
}

Dataset load_data(const DataOptions& d) {
    auto ds = ingest(d.path, parse_format(d.format));
    if (ds.size() == 0) throw DatasetError("'" + d.path + "' holds no items");
    if (d.unit) ds = as_unit_vectors(std::move(ds));
    return ds;
}

// LSH parameters; a profile fills the defaults that the flags leave unset.
struct LshOptions {
    std::string profile;
    std::optional<std::size_t> k, L;
    std::size_t replicas = 1;
    std::optional<double> w, r, similarity;
    double c = 2.0;
    bool no_sketches = false;
};

void add_lsh(CLI::App* cmd, LshOptions& o) {
    cmd->add_option("--profile", o.profile, "Parameter preset: movielens, lastfm, mnist, sift, glove");
    cmd->add_option("--k", o.k, "Hashes concatenated per table");
    cmd->add_option("--L", o.L, "Tables per replica");
    cmd->add_option("--replicas", o.replicas, "Independent copies of the L tables");
    cmd->add_option("--w", o.w, "Grid width (Euclidean)");
    cmd->add_option("--r", o.r, "Near radius as a distance (1 - Jaccard for sets)");
    cmd->add_option("--similarity", o.similarity, "Near threshold as a Jaccard similarity");
    cmd->add_option("--c", o.c, "Approximation factor: far radius is c * r");
    cmd->add_flag("--no-sketches", o.no_sketches, "Skip per-bucket distinct sketches");
}

LshParams lsh_params(const LshOptions& o, std::uint64_t seed) {
    LshParams p;
    if (!o.profile.empty()) {
        const auto prof = dataset_profile(o.profile);
        p.k = prof.k;
        p.L = prof.L;
        p.w = prof.w;
        p.r = prof.r;
    }
    if (o.k) p.k = *o.k;
    if (o.L) p.L = *o.L;
    if (o.w) p.w = *o.w;
    if (o.r && o.similarity) throw UsageError("give either --r or --similarity");
    if (o.r) p.r = *o.r;
    if (o.similarity) p.r = JaccardSpace::radius_from_similarity(*o.similarity);
    p.replicas = o.replicas;
    p.c = o.c;
    p.seed = seed;
    p.sketches = !o.no_sketches;
    if (p.k == 0 || p.L == 0 || p.replicas == 0) throw UsageError("k, L and replicas must be positive");
    if (!(p.r > 0)) throw UsageError("a positive radius is required (--r, --similarity or --profile)");
    if (!(p.c >= 1)) throw UsageError("c must be >= 1");
    return p;
}

struct LsfOptions {
    double alpha = 0.5, beta = 0.0, eps = 0.2;
    std::optional<std::size_t> filters, repetitions;
};

void add_lsf(CLI::App* cmd, LsfOptions& o) {
    cmd->add_option("--alpha", o.alpha, "lsf-fair: near inner-product threshold");
    cmd->add_option("--beta", o.beta, "lsf-fair: far inner-product threshold");
    cmd->add_option("--lsf-eps", o.eps, "lsf-fair: query slack");
    cmd->add_option("--filters", o.filters, "lsf-fair: filters per tensor part");
    cmd->add_option("--repetitions", o.repetitions, "lsf-fair: independent repetitions");
}

LsfParams lsf_params(const LsfOptions& o, std::uint64_t seed) {
    LsfParams p;
    p.alpha = o.alpha;
    p.beta = o.beta;
    p.eps = o.eps;
    p.filters_per_part = o.filters;
    p.repetitions = o.repetitions;
    p.seed = seed;
    return p;
}

// Query eligibility: the knn-th neighbor at distance >= threshold, or at
// similarity <= threshold with --threshold-similarity.
struct SelectOptions {
    std::size_t count = 50;
    std::size_t knn = 40;
    double threshold = 0;
    bool similarity = false;
};

void add_select(CLI::App* cmd, SelectOptions& o) {
    cmd->add_option("--queries", o.count, "Number of queries drawn from the dataset");
    cmd->add_option("--knn", o.knn, "Neighbor rank used for eligibility");
    cmd->add_option("--threshold", o.threshold, "Eligibility threshold on the knn-th neighbor")->required();
    cmd->add_flag("--threshold-similarity", o.similarity, "Threshold is a similarity, not a distance");
}

QuerySelection select(const Dataset& ds, const SelectOptions& o, std::uint64_t seed) {
    return select_queries(ds, o.count, o.knn, {o.threshold, o.similarity}, seed);
}

std::vector<Algorithm> parse_algorithms(const std::vector<std::string>& names) {
    std::vector<Algorithm> out;
    for (const auto& n : names) {
        if (n == "all") {
            for (Algorithm a : all_algorithms()) {
                if (a != Algorithm::LsfFair) out.push_back(a);
            }
        } else {
            out.push_back(parse_algorithm(n));
        }
    }
    if (out.empty()) throw UsageError("no algorithm given");
    return out;
}

std::string token_path(const std::string& index_path) { return index_path + ".tokens"; }

// ---- build

struct BuildCmd {
    DataOptions data;
    LshOptions lsh;
    std::uint64_t seed = 1;
    std::string index;
};

int run_build(const BuildCmd& b) {
    const auto ds = load_data(b.data);
    const auto p = lsh_params(b.lsh, b.seed);
    if (ds.kind == DatasetKind::Sets) {
        const auto idx = JaccardLshIndex::build(ds.sets, p);
        save_index(b.index, idx);
        std::ofstream tok(token_path(b.index));
        if (!tok) throw UsageError("cannot write '" + token_path(b.index) + "'");
        for (const auto& t : ds.token_names) tok << t << '\n';
        std::cerr << "indexed " << idx.size() << " sets into " << idx.num_buckets() << " buckets\n";
    } else {
        const auto idx = EuclideanLshIndex::build(ds.vectors, p);
        save_index(b.index, idx);
        std::cerr << "indexed " << idx.size() << " vectors into " << idx.num_buckets() << " buckets\n";
    }
    return kExitOk;
}

// ---- query

struct QueryCmd {
    std::string index;
    std::string queries;
    std::string input_format;
    std::string algorithm = "fair-nnis";
    std::size_t repeats = 1;
    double eps = 0.1;
    std::uint64_t seed = 1;
    Output out;
};

// Query-side interning through the token table written by `build`;
// tokens the index has never seen get fresh ids.
std::vector<TokenSet> read_query_sets(const QueryCmd& c) {
    std::ifstream tf(token_path(c.index));
    if (!tf) throw UsageError("missing token table '" + token_path(c.index) + "'");
    std::unordered_map<std::string, std::uint32_t> ids;
    std::string tok;
    while (std::getline(tf, tok)) ids.emplace(tok, static_cast<std::uint32_t>(ids.size()));
    std::ifstream in(c.queries);
    if (!in) throw UsageError("cannot open '" + c.queries + "'");
    std::vector<TokenSet> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream ls(line);
        TokenSet s;
        while (ls >> tok) s.push_back(ids.try_emplace(tok, static_cast<std::uint32_t>(ids.size())).first->second);
        out.push_back(normalize_tokens(std::move(s)));
    }
    return out;
}

template <class Space>
int query_index(LshIndex<Space> idx, const std::vector<typename Space::Point>& queries, const QueryCmd& c) {
    const bool dependent = c.algorithm == "fair-nn-dependent";
    const bool whp = c.algorithm == "fair-nn-whp";
    const bool ann = c.algorithm == "fair-ann";
    std::optional<Algorithm> bench_alg;
    if (!dependent && !whp && !ann) {
        bench_alg = parse_algorithm(c.algorithm);
        if (*bench_alg == Algorithm::LsfFair) throw UsageError("lsf-fair needs the fairness command");
    }
    Table t(c.out.format, {"query_id", "algorithm", "element_id", "count"});
    std::size_t none = 0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
        const auto& q = queries[qi];
        Rng gen = bench::detail::query_rng(c.seed, qi, 1);
        const BucketQuery bq = bench::detail::bucket_query(idx, q);
        std::map<ElementId, std::size_t> counts;
        for (std::size_t i = 0; i < c.repeats; ++i) {
            std::optional<ElementId> got;
            if (bench_alg) {
                got = bench::detail::run_once(*bench_alg, idx, q, bq, gen, 0).point;
            } else {
                const FairNnAnswer a = dependent ? fair_nn_dependent(idx, q)
                                       : whp     ? fair_nn_independent_whp(idx, q, gen)
                                                 : fair_ann_approx(idx, q, c.eps, gen);
                if (a.status == SampleStatus::BudgetExceeded) throw FailureEvent("outlier budget exceeded");
                if (a.has_point()) got = a.point;
            }
            if (got) {
                ++counts[*got];
            } else {
                ++none;
            }
        }
        for (const auto& [e, n] : counts) t.add({{"query_id", qi}, {"algorithm", c.algorithm}, {"element_id", e}, {"count", n}});
    }
    c.out.emit(t);
    std::cerr << queries.size() << " queries, " << none << " empty answers\n";
    return kExitOk;
}

int run_query(const QueryCmd& c) {
    if (c.repeats == 0) throw UsageError("--repeats must be >= 1");
    std::ifstream in(c.index, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + c.index + "'");
    const auto space = saved_index_space(in);
    if (space == 1) {
        return query_index(load_index<JaccardSpace>(c.index), read_query_sets(c), c);
    }
    const std::string fmt = c.input_format.empty() ? "csv" : c.input_format;
    auto qs = ingest(c.queries, parse_format(fmt));
    if (qs.kind == DatasetKind::Sets) throw UsageError("the index holds vectors; give vector queries");
    auto idx = load_index<EuclideanSpace>(c.index);
    if (!qs.vectors.empty() && idx.size() > 0 && qs.dim != idx.point(0).size()) {
        throw UsageError("query dimension " + std::to_string(qs.dim) + " does not match the index");
    }
    return query_index(std::move(idx), qs.vectors, c);
}

// ---- fairness

struct FairnessCmd {
    DataOptions data;
    LshOptions lsh;
    LsfOptions lsf;
    SelectOptions sel;
    std::vector<std::string> algorithms{"all"};
    std::size_t multiplier = 100;
    std::size_t threads = 1;
    std::size_t bins = 10;
    std::size_t retry_cap = 0;
    bool no_reference = false;
    bool timing = false;
    std::uint64_t seed = 1;
    std::string report;
    Output out;
};

int run_fairness(const FairnessCmd& f) {
    const auto ds = load_data(f.data);
    const auto algs = parse_algorithms(f.algorithms);
    const auto sel = select(ds, f.sel, f.seed);
    std::cerr << sel.eligible << " eligible queries, " << sel.queries.size() << " selected\n";
    Table t(f.out.format, {"query_id", "algorithm", "element_id", "count"});
    json reports = json::array();
    for (Algorithm a : algs) {
        ExperimentConfig cfg;
        cfg.algorithm = a;
        if (a != Algorithm::LsfFair) cfg.lsh = lsh_params(f.lsh, f.seed);
        cfg.lsf = lsf_params(f.lsf, f.seed);
        cfg.multiplier = f.multiplier;
        cfg.threads = f.threads;
        cfg.bins = f.bins;
        cfg.retry_cap = f.retry_cap;
        cfg.reference = !f.no_reference;
        cfg.seed = f.seed;
        const auto rep = run_fairness_experiment(ds, sel, cfg);
        for (auto& r : frequency_records(rep)) t.add(std::move(r));
        reports.push_back(to_json(rep, f.timing));
        std::cerr << std::left << std::setw(18) << to_string(a) << " mean TVD " << rep.mean_tvd() << " over "
                  << rep.queries.size() << " queries (" << rep.skipped << " skipped)\n";
    }
    f.out.emit(t);
    if (!f.report.empty()) {
        std::ofstream r(f.report);
        if (!r) throw UsageError("cannot open '" + f.report + "' for writing");
        r << reports.dump(2) << '\n';
    }
    return kExitOk;
}

// ---- ratio

struct RatioCmd {
    DataOptions data;
    SelectOptions sel;
    std::vector<double> radii;
    std::vector<double> factors{1.0, 1.5, 2.0, 3.0};
    bool similarity = false;
    std::uint64_t seed = 1;
    Output out;
};

int run_ratio(const RatioCmd& r) {
    const auto ds = load_data(r.data);
    const auto sel = select(ds, r.sel, r.seed);
    Table t(r.out.format, {"r", "c", "query_id", "n_r", "n_cr", "ratio"});
    for (const auto& row : run_ratio_study(ds, sel, r.radii, r.factors, r.similarity)) {
        json j{{"r", row.r}, {"c", row.c}, {"query_id", row.query_id}, {"n_r", row.n_r}, {"n_cr", row.n_cr}};
        j["ratio"] = row.ratio ? json(*row.ratio) : json();
        t.add(std::move(j));
    }
    r.out.emit(t);
    return kExitOk;
}

// ---- case-study

struct CaseCmd {
    CaseStudyConfig cfg;
    Output out;
};

int run_case(const CaseCmd& c) {
    const auto rep = run_case_study(c.cfg);
    Table t(c.out.format, {"algorithm", "point", "similarity", "count", "probability"});
    auto row = [&](const char* alg, const char* point, double sim, std::size_t n, std::size_t total) {
        t.add({{"algorithm", alg}, {"point", point}, {"similarity", sim}, {"count", n},
               {"probability", total ? static_cast<double>(n) / static_cast<double>(total) : 0.0}});
    };
    row("naive-lsh", "x", rep.j_qx, rep.x, rep.repeats);
    row("naive-lsh", "y", rep.j_qy, rep.y, rep.repeats);
    row("naive-lsh", "z", rep.j_qz, rep.z, rep.repeats);
    row("naive-lsh", "m", 0.0, rep.m, rep.repeats);
    row("naive-lsh", "none", 0.0, rep.none, rep.repeats);
    std::size_t nnis_total = rep.nnis_none;
    for (const auto& [e, n] : rep.nnis_counts) nnis_total += n;
    const char* names[] = {"x", "y", "z"};
    const double sims[] = {rep.j_qx, rep.j_qy, rep.j_qz};
    std::size_t nnis_m = 0;
    for (const auto& [e, n] : rep.nnis_counts) nnis_m += e < 3 ? 0 : n;
    for (ElementId e = 0; e < 3; ++e) {
        const auto it = rep.nnis_counts.find(e);
        row("fair-nnis", names[e], sims[e], it == rep.nnis_counts.end() ? 0 : it->second, nnis_total);
    }
    row("fair-nnis", "m", 0.0, nnis_m, nnis_total);
    row("fair-nnis", "none", 0.0, rep.nnis_none, nnis_total);
    c.out.emit(t);
    std::cerr << "P(x) / P(y) = " << (rep.p_y() > 0 ? rep.p_x() / rep.p_y() : 0.0) << '\n';
    return kExitOk;
}

// ---- timing

struct TimingCmd {
    DataOptions data;
    LshOptions lsh;
    SelectOptions sel;
    std::vector<std::string> algorithms{"uniform-uniform", "weighted-uniform", "optimal", "degree-approx",
                                        "rank-perturb", "naive"};
    std::size_t multiplier = 100;
    std::size_t runs = 10;
    std::uint64_t seed = 1;
    Output out;
};

int run_timing_cmd(const TimingCmd& c) {
    const auto ds = load_data(c.data);
    const auto sel = select(ds, c.sel, c.seed);
    std::vector<ExperimentConfig> cfgs;
    for (Algorithm a : parse_algorithms(c.algorithms)) {
        if (a == Algorithm::LsfFair) throw UsageError("timing covers the LSH algorithms only");
        ExperimentConfig cfg;
        cfg.algorithm = a;
        cfg.lsh = lsh_params(c.lsh, c.seed);
        cfg.multiplier = c.multiplier;
        cfg.seed = c.seed;
        cfgs.push_back(cfg);
    }
    Table t(c.out.format, {"algorithm", "runs", "mean_seconds", "median_seconds"});
    for (const auto& row : run_timing(ds, sel, cfgs, c.runs)) {
        t.add({{"algorithm", to_string(row.algorithm)}, {"runs", row.runs}, {"mean_seconds", row.mean_seconds},
               {"median_seconds", row.median_seconds}});
    }
    c.out.emit(t);
    return kExitOk;
}

// ---- selftest

struct SelftestCmd {
    SelftestOptions opts;
    std::vector<int> only;
    Output out;
};

int run_selftest_cmd(const SelftestCmd& c) {
    Table t(c.out.format, {"criterion", "name", "passed", "seconds", "detail"});
    std::size_t failed = 0;
    const std::set<int> only(c.only.begin(), c.only.end());
    run_selftest(c.opts, only, [&](const CriterionResult& r) {
        std::cerr << "criterion " << r.id << ' ' << r.name << (r.passed ? " PASS" : " FAIL") << '\n';
        failed += r.passed ? 0 : 1;
        t.add({{"criterion", r.id}, {"name", r.name}, {"passed", r.passed}, {"seconds", r.seconds},
               {"detail", r.detail}});
    });
    c.out.emit(t);
    return failed ? kExitUsage : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fair near-neighbor sampling: index tools and benchmarks"};
    app.require_subcommand(1);

    BuildCmd build;
    auto* b = app.add_subcommand("build", "Build an LSH index and save it");
    add_data(b, build.data);
    add_lsh(b, build.lsh);
    b->add_option("--seed", build.seed, "Random seed");
    b->add_option("--index", build.index, "Index file to write")->required();

    QueryCmd query;
    auto* q = app.add_subcommand("query", "Sample near neighbors from a saved index");
    q->add_option("--index", query.index, "Index file")->required()->check(CLI::ExistingFile);
    q->add_option("--queries", query.queries, "Query file, one point per line")->required()->check(CLI::ExistingFile);
    q->add_option("--input-format", query.input_format, "Query file format for vector indexes (csv | fvecs)");
    q->add_option("--algorithm", query.algorithm,
                  "uniform-uniform, weighted-uniform, optimal, degree-approx, rank-perturb, naive, fair-nnis, "
                  "fair-nn-dependent, fair-nn-whp, fair-ann");
    q->add_option("--repeats", query.repeats, "Samples per query");
    q->add_option("--eps", query.eps, "fair-ann: uniformity slack");
    q->add_option("--seed", query.seed, "Random seed");
    add_output(q, query.out);

    FairnessCmd fair;
    auto* f = app.add_subcommand("fairness", "Frequency battery: repeats each query and counts the reported points");
    add_data(f, fair.data);
    add_lsh(f, fair.lsh);
    add_lsf(f, fair.lsf);
    add_select(f, fair.sel);
    f->add_option("--algorithm", fair.algorithms, "Algorithms to run, or 'all'")->expected(1, -1);
    f->add_option("--multiplier", fair.multiplier, "Repeats per query as a multiple of M(q)");
    f->add_option("--threads", fair.threads, "Query-level worker threads");
    f->add_option("--bins", fair.bins, "Distance bins for the frequency deltas");
    f->add_option("--retry-cap", fair.retry_cap, "uniform-uniform retry cap (0: default)");
    f->add_flag("--no-reference", fair.no_reference, "Skip the optimal reference run");
    f->add_flag("--timing", fair.timing, "Include timings in the report");
    f->add_option("--seed", fair.seed, "Random seed");
    f->add_option("--report", fair.report, "Also write the full per-query report as JSON");
    add_output(f, fair.out);

    RatioCmd ratio;
    auto* r = app.add_subcommand("ratio", "Neighborhood growth n(q, cr) / n(q, r)");
    add_data(r, ratio.data);
    add_select(r, ratio.sel);
    r->add_option("--radius", ratio.radii, "Radii (or similarities)")->required()->expected(1, -1);
    r->add_option("--factor", ratio.factors, "Approximation factors c")->expected(1, -1);
    r->add_flag("--similarity", ratio.similarity, "Radii are similarities; the outer ball is similarity >= c r");
    r->add_option("--seed", ratio.seed, "Random seed");
    add_output(r, ratio.out);

    CaseCmd cs;
    auto* c = app.add_subcommand("case-study", "The planted X, Y, Z instance under standard LSH and FairNNIS");
    c->add_option("--k", cs.cfg.k, "Hashes per table");
    c->add_option("--L", cs.cfg.L, "Tables");
    c->add_option("--builds", cs.cfg.builds, "Independent index builds");
    c->add_option("--repeats", cs.cfg.repeats, "Queries spread over the builds");
    c->add_option("--nnis-L", cs.cfg.nnis_L, "Tables of the FairNNIS index");
    c->add_option("--nnis-repeats", cs.cfg.nnis_repeats, "FairNNIS samples");
    c->add_option("--seed", cs.cfg.seed, "Random seed");
    add_output(c, cs.out);

    TimingCmd timing;
    auto* t = app.add_subcommand("timing", "Wall-clock of the query battery per algorithm");
    add_data(t, timing.data);
    add_lsh(t, timing.lsh);
    add_select(t, timing.sel);
    t->add_option("--algorithm", timing.algorithms, "Algorithms to time, or 'all'")->expected(1, -1);
    t->add_option("--multiplier", timing.multiplier, "Repeats per query as a multiple of M(q)");
    t->add_option("--runs", timing.runs, "Battery repetitions");
    t->add_option("--seed", timing.seed, "Random seed");
    add_output(t, timing.out);

    SelftestCmd st;
    auto* s = app.add_subcommand("selftest", "Run the property suites");
    s->add_flag("--quick", st.opts.quick, "Smaller trial counts");
    s->add_option("--seed", st.opts.seed, "Random seed");
    s->add_option("--only", st.only, "Criterion ids to run")->expected(1, -1);
    add_output(s, st.out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*b) return run_build(build);
        if (*q) return run_query(query);
        if (*f) return run_fairness(fair);
        if (*r) return run_ratio(ratio);
        if (*c) return run_case(cs);
        if (*t) return run_timing_cmd(timing);
        if (*s) return run_selftest_cmd(st);
    } catch (const FailureEvent& e) {
        std::cerr << "failure event: " << e.what() << '\n';
        return kExitFailureEvent;
    } catch (const ReplicaExhausted& e) {
        std::cerr << "failure event: " << e.what() << '\n';
        return kExitFailureEvent;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}
