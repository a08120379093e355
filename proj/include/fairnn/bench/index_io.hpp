#pragma once

// Binary persistence of LSH indexes. Layout: magic "FAIRNNIX", u32
// version, u32 space kind, params, points, hash units, buckets (table,
// key, members), rank order, perturbation RNG state as text. Integers are
// little-endian u64 unless noted; doubles are stored as their bit pattern.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "fairnn/lsh_index.hpp"

namespace fairnn::bench {

class IndexIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr char kIndexMagic[8] = {'F', 'A', 'I', 'R', 'N', 'N', 'I', 'X'};
inline constexpr std::uint32_t kIndexVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "index files assume a little-endian host");

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void i64(std::int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        raw(s.data(), s.size());
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}
    void raw(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw IndexIoError("truncated index file");
    }
    std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
    std::int64_t i64() { std::int64_t v; raw(&v, sizeof v); return v; }
    double f64() { return std::bit_cast<double>(u64()); }
    // Length prefix checked against a sanity bound before allocating.
    std::size_t count(std::uint64_t limit = std::uint64_t{1} << 40) {
        const std::uint64_t n = u64();
        if (n > limit) throw IndexIoError("corrupt length field");
        return static_cast<std::size_t>(n);
    }
    std::string str() {
        std::string s(count(), '\0');
        raw(s.data(), s.size());
        return s;
    }

private:
    std::istream& in_;
};

template <class Space>
constexpr std::uint32_t space_tag() {
    return std::is_same_v<Space, JaccardSpace> ? 1u : 2u;
}

inline void write_point(Writer& w, const TokenSet& p) {
    w.u64(p.size());
    for (auto t : p) w.u32(t);
}
inline void write_point(Writer& w, const Vector& p) {
    w.u64(p.size());
    for (double x : p) w.f64(x);
}
inline void read_point(Reader& r, TokenSet& p) {
    p.resize(r.count());
    for (auto& t : p) t = r.u32();
}
inline void read_point(Reader& r, Vector& p) {
    p.resize(r.count());
    for (auto& x : p) x = r.f64();
}

inline void write_unit(Writer& w, const MinHashBit& u) {
    w.u64(u.order_seed());
    w.u64(u.bit_seed());
}
inline void write_unit(Writer& w, const GridHash& u) {
    write_point(w, u.a());
    w.f64(u.b());
    w.f64(u.w());
}
inline void read_unit(Reader& r, MinHashBit& u) {
    const auto a = r.u64();
    const auto b = r.u64();
    u = MinHashBit(a, b);
}
inline void read_unit(Reader& r, GridHash& u) {
    Vector a;
    read_point(r, a);
    const double b = r.f64();
    const double w = r.f64();
    u = GridHash(std::move(a), b, w);
}

}  // namespace detail

/// Peeks at the space of a saved index: 1 Jaccard, 2 Euclidean.
inline std::uint32_t saved_index_space(std::istream& in) {
    detail::Reader r(in);
    char magic[8];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kIndexMagic, sizeof magic) != 0) throw IndexIoError("not an index file");
    const auto version = r.u32();
    if (version != kIndexVersion) throw IndexIoError("unsupported index version " + std::to_string(version));
    return r.u32();
}

template <class Space>
void save_index(std::ostream& out, const LshIndex<Space>& index) {
    const auto st = index.state();
    detail::Writer w(out);
    w.raw(kIndexMagic, sizeof kIndexMagic);
    w.u32(kIndexVersion);
    w.u32(detail::space_tag<Space>());
    w.u64(st.params.k);
    w.u64(st.params.L);
    w.u64(st.params.replicas);
    w.f64(st.params.w);
    w.f64(st.params.r);
    w.f64(st.params.c);
    w.u64(st.params.seed);
    w.u32(st.params.sketches ? 1 : 0);
    w.u64(st.points.size());
    for (const auto& p : st.points) detail::write_point(w, p);
    w.u64(st.units.size());
    for (const auto& u : st.units) detail::write_unit(w, u);
    w.u64(st.buckets.size());
    for (std::size_t b = 0; b < st.buckets.size(); ++b) {
        w.u32(st.bucket_table[b]);
        w.u64(st.bucket_keys[b].size());
        for (auto x : st.bucket_keys[b]) w.i64(x);
        w.u64(st.buckets[b].size());
        for (auto x : st.buckets[b]) w.u32(x);
    }
    w.u64(st.rank_order.size());
    for (auto x : st.rank_order) w.u32(x);
    std::ostringstream rng;
    rng << st.perturbation;
    w.str(rng.str());
    if (!out) throw IndexIoError("write failed");
}

template <class Space>
LshIndex<Space> load_index(std::istream& in) {
    const auto tag = saved_index_space(in);
    if (tag != detail::space_tag<Space>()) throw IndexIoError("index was saved for a different space");
    detail::Reader r(in);
    LshIndexState<Space> st;
    st.params.k = r.u64();
    st.params.L = r.u64();
    st.params.replicas = r.u64();
    st.params.w = r.f64();
    st.params.r = r.f64();
    st.params.c = r.f64();
    st.params.seed = r.u64();
    st.params.sketches = r.u32() != 0;
    st.points.resize(r.count());
    for (auto& p : st.points) detail::read_point(r, p);
    st.units.resize(r.count());
    for (auto& u : st.units) detail::read_unit(r, u);
    const std::size_t nb = r.count();
    st.buckets.resize(nb);
    st.bucket_keys.resize(nb);
    st.bucket_table.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        st.bucket_table[b] = r.u32();
        st.bucket_keys[b].resize(r.count());
        for (auto& x : st.bucket_keys[b]) x = r.i64();
        st.buckets[b].resize(r.count());
        for (auto& x : st.buckets[b]) x = r.u32();
    }
    st.rank_order.resize(r.count());
    for (auto& x : st.rank_order) x = r.u32();
    std::istringstream rng(r.str());
    rng >> st.perturbation;
    if (!rng) throw IndexIoError("corrupt RNG state");
    try {
        return LshIndex<Space>::restore(std::move(st));
    } catch (const std::exception& e) {
        throw IndexIoError(std::string("invalid index: ") + e.what());
    }
}

template <class Space>
void save_index(const std::string& path, const LshIndex<Space>& index) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IndexIoError("cannot open '" + path + "' for writing");
    save_index(out, index);
}

template <class Space>
LshIndex<Space> load_index(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IndexIoError("cannot open '" + path + "'");
    return load_index<Space>(in);
}

}  // namespace fairnn::bench
