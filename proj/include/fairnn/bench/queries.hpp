#pragma once

// Query selection: points whose knn_rank-th nearest neighbor lies beyond
// a threshold are eligible; count of them are drawn and removed from the
// indexable set.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairnn/bench/dataset.hpp"
#include "fairnn/random.hpp"

namespace fairnn::bench {

/// A threshold in distance terms, or in similarity terms for set and
/// unit-vector data (similarity = Jaccard or inner product).
struct Threshold {
    double value = 0.0;
    bool similarity = false;
};

/// Distance between items i and j: 1 - J for sets, Euclidean otherwise.
inline double item_distance(const Dataset& ds, std::size_t i, std::size_t j) {
    if (ds.kind == DatasetKind::Sets) return JaccardSpace::distance(ds.sets[i], ds.sets[j]);
    return EuclideanSpace::distance(ds.vectors[i], ds.vectors[j]);
}

/// Similarity between items: J for sets, inner product for vectors.
inline double item_similarity(const Dataset& ds, std::size_t i, std::size_t j) {
    if (ds.kind == DatasetKind::Sets) return jaccard_similarity(ds.sets[i], ds.sets[j]);
    return dot(ds.vectors[i], ds.vectors[j]);
}

struct QuerySelection {
    std::vector<std::size_t> queries;  ///< dataset ids, in draw order
    std::vector<std::size_t> indexed;  ///< remaining ids, ascending
    std::size_t eligible = 0;
};

/// Distance (or similarity) of every item to its knn_rank-th nearest other
/// item, by brute force.
inline std::vector<double> kth_neighbor_values(const Dataset& ds, std::size_t knn_rank, bool similarity) {
    const std::size_t n = ds.size();
    if (knn_rank == 0 || knn_rank >= n) {
        throw std::invalid_argument("knn_rank must lie in [1, n - 1]");
    }
    std::vector<double> out(n), row(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            row[m++] = similarity ? -item_similarity(ds, i, j) : item_distance(ds, i, j);
        }
        std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(knn_rank - 1), row.end());
        out[i] = similarity ? -row[knn_rank - 1] : row[knn_rank - 1];
    }
    return out;
}

/// An item is eligible when its knn_rank-th neighbor is at distance >=
/// threshold, or at similarity <= threshold.
inline QuerySelection select_queries(const Dataset& ds, std::size_t count, std::size_t knn_rank,
                                     const Threshold& threshold, std::uint64_t seed) {
    const auto kth = kth_neighbor_values(ds, knn_rank, threshold.similarity);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < kth.size(); ++i) {
        const bool ok = threshold.similarity ? kth[i] <= threshold.value : kth[i] >= threshold.value;
        if (ok) eligible.push_back(i);
    }
    if (eligible.size() < count) {
        throw std::runtime_error("only " + std::to_string(eligible.size()) + " eligible queries, " +
                                 std::to_string(count) + " requested");
    }
    Rng gen(derive_seed(seed, 31));
    // Partial Fisher-Yates: the first `count` entries are a uniform draw.
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + uniform_index(gen, eligible.size() - i);
        std::swap(eligible[i], eligible[j]);
    }
    QuerySelection sel;
    sel.eligible = eligible.size();
    sel.queries.assign(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(count));
    std::vector<char> taken(ds.size(), 0);
    for (std::size_t q : sel.queries) taken[q] = 1;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!taken[i]) sel.indexed.push_back(i);
    }
    return sel;
}

}  // namespace fairnn::bench
