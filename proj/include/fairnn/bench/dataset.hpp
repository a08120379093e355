#pragma once

// Datasets for the experiment drivers: set-valued items (Jaccard),
// vectors (Euclidean) and unit vectors (inner product), with readers for
// id-set lines, dense CSV and fvecs-style binary files.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairnn/lsf_index.hpp"
#include "fairnn/lsh_index.hpp"
#include "fairnn/spaces.hpp"

namespace fairnn::bench {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class DatasetKind { Sets, Vectors, UnitVectors };
enum class DatasetFormat { IdSetLines, DenseCsv, FvecsBinary };

inline const char* to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::Sets: return "sets";
        case DatasetKind::Vectors: return "vectors";
        case DatasetKind::UnitVectors: return "unit-vectors";
    }
    return "?";
}

inline DatasetFormat parse_format(const std::string& s) {
    if (s == "sets" || s == "id-set-lines") return DatasetFormat::IdSetLines;
    if (s == "csv" || s == "dense-vector-csv") return DatasetFormat::DenseCsv;
    if (s == "fvecs" || s == "fvecs-like-binary") return DatasetFormat::FvecsBinary;
    throw DatasetError("unknown dataset format '" + s + "'");
}

struct Dataset {
    DatasetKind kind = DatasetKind::Sets;
    std::string name;
    std::vector<TokenSet> sets;            ///< Sets: interned, sorted tokens
    std::vector<Vector> vectors;           ///< Vectors / UnitVectors, row-major
    std::vector<std::string> token_names;  ///< interned id -> token as read
    std::size_t dim = 0;

    std::size_t size() const { return kind == DatasetKind::Sets ? sets.size() : vectors.size(); }
    std::size_t universe() const { return token_names.size(); }

    double average_set_size() const {
        if (sets.empty()) return 0.0;
        double s = 0;
        for (const auto& x : sets) s += static_cast<double>(x.size());
        return s / static_cast<double>(sets.size());
    }

    bool operator==(const Dataset&) const = default;
};

/// Restriction of a dataset to the listed items, in that order.
inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& ids) {
    Dataset out;
    out.kind = ds.kind;
    out.name = ds.name;
    out.token_names = ds.token_names;
    out.dim = ds.dim;
    for (std::size_t i : ids) {
        if (ds.kind == DatasetKind::Sets) {
            out.sets.push_back(ds.sets.at(i));
        } else {
            out.vectors.push_back(ds.vectors.at(i));
        }
    }
    return out;
}

/// Rows scaled to unit norm; zero rows are rejected.
inline Dataset as_unit_vectors(Dataset ds) {
    if (ds.kind == DatasetKind::Sets) throw DatasetError("set-valued data cannot be normalized");
    for (std::size_t i = 0; i < ds.vectors.size(); ++i) {
        const double n = std::sqrt(dot(ds.vectors[i], ds.vectors[i]));
        if (!(n > 0.0)) throw DatasetError("row " + std::to_string(i) + " has zero norm");
        for (auto& x : ds.vectors[i]) x /= n;
    }
    ds.kind = DatasetKind::UnitVectors;
    return ds;
}

namespace detail {

inline Dataset read_id_sets(std::istream& in) {
    Dataset ds;
    ds.kind = DatasetKind::Sets;
    std::unordered_map<std::string, std::uint32_t> intern;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream ls(line);
        TokenSet s;
        std::string tok;
        while (ls >> tok) {
            auto [it, fresh] = intern.try_emplace(tok, static_cast<std::uint32_t>(ds.token_names.size()));
            if (fresh) ds.token_names.push_back(tok);
            s.push_back(it->second);
        }
        ds.sets.push_back(normalize_tokens(std::move(s)));
    }
    return ds;
}

inline Dataset read_csv(std::istream& in) {
    Dataset ds;
    ds.kind = DatasetKind::Vectors;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Vector v;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            std::size_t used = 0;
            double x = 0;
            try {
                x = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || cell.find_first_not_of(" \t", used) != std::string::npos) {
                throw DatasetError("line " + std::to_string(lineno) + ": cannot parse '" + cell + "' as a number");
            }
            if (!std::isfinite(x)) throw DatasetError("line " + std::to_string(lineno) + ": non-finite value");
            v.push_back(x);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (ds.vectors.empty()) {
            ds.dim = v.size();
        } else if (v.size() != ds.dim) {
            throw DatasetError("line " + std::to_string(lineno) + ": " + std::to_string(v.size()) +
                               " values, expected " + std::to_string(ds.dim));
        }
        ds.vectors.push_back(std::move(v));
    }
    return ds;
}

// Records of a little-endian int32 dimension followed by that many float32.
inline Dataset read_fvecs(std::istream& in) {
    Dataset ds;
    ds.kind = DatasetKind::Vectors;
    std::uint64_t offset = 0;
    while (true) {
        std::int32_t d = 0;
        in.read(reinterpret_cast<char*>(&d), sizeof d);
        if (in.gcount() == 0) break;
        if (in.gcount() != sizeof d) throw DatasetError("offset " + std::to_string(offset) + ": truncated header");
        if (d <= 0) throw DatasetError("offset " + std::to_string(offset) + ": invalid dimension " + std::to_string(d));
        if (!ds.vectors.empty() && static_cast<std::size_t>(d) != ds.dim) {
            throw DatasetError("offset " + std::to_string(offset) + ": dimension " + std::to_string(d) +
                               ", expected " + std::to_string(ds.dim));
        }
        std::vector<float> buf(static_cast<std::size_t>(d));
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (static_cast<std::size_t>(in.gcount()) != buf.size() * sizeof(float)) {
            throw DatasetError("offset " + std::to_string(offset) + ": truncated vector");
        }
        Vector v(buf.begin(), buf.end());
        for (double x : v) {
            if (!std::isfinite(x)) throw DatasetError("offset " + std::to_string(offset) + ": non-finite value");
        }
        ds.dim = v.size();
        ds.vectors.push_back(std::move(v));
        offset += sizeof d + buf.size() * sizeof(float);
    }
    return ds;
}

}  // namespace detail

inline Dataset ingest(std::istream& in, DatasetFormat format, std::string name = {}) {
    Dataset ds;
    switch (format) {
        case DatasetFormat::IdSetLines: ds = detail::read_id_sets(in); break;
        case DatasetFormat::DenseCsv: ds = detail::read_csv(in); break;
        case DatasetFormat::FvecsBinary: ds = detail::read_fvecs(in); break;
    }
    ds.name = std::move(name);
    return ds;
}

inline Dataset ingest(const std::string& path, DatasetFormat format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open '" + path + "'");
    return ingest(in, format, path);
}

/// Canonical text form: id-set lines with the original tokens, or CSV
/// with round-trip precision.
inline void write_canonical(std::ostream& out, const Dataset& ds) {
    if (ds.kind == DatasetKind::Sets) {
        for (const auto& s : ds.sets) {
            // Tokens are written in first-appearance order so that
            // re-reading reproduces the interning.
            for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << ds.token_names[s[i]];
            out << '\n';
        }
        return;
    }
    char buf[32];
    for (const auto& v : ds.vectors) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i]);
            out << (i ? "," : "") << buf;
        }
        out << '\n';
    }
}

/// Parameter presets of the five reference datasets. Radii are
/// distances; for set data the similarity threshold is kept as well.
struct DatasetProfile {
    std::string name;
    DatasetKind kind = DatasetKind::Sets;
    std::size_t k = 1;
    std::size_t L = 1;
    double w = 1.0;
    double r = 0.0;
    std::optional<double> similarity;
};

inline std::vector<DatasetProfile> dataset_profiles() {
    return {
        {"movielens", DatasetKind::Sets, 8, 100, 1.0, 1.0 - 0.25, 0.25},
        {"lastfm", DatasetKind::Sets, 8, 100, 1.0, 1.0 - 0.2, 0.2},
        {"mnist", DatasetKind::Vectors, 15, 100, 3750, 1275, std::nullopt},
        {"sift", DatasetKind::Vectors, 15, 100, 870, 270, std::nullopt},
        {"glove", DatasetKind::Vectors, 15, 100, 15.7, 4.7, std::nullopt},
    };
}

inline DatasetProfile dataset_profile(const std::string& name) {
    for (auto& p : dataset_profiles()) {
        if (p.name == name) return p;
    }
    throw DatasetError("unknown profile '" + name + "'");
}

}  // namespace fairnn::bench
