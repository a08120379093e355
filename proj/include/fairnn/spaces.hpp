#pragma once

// Point representations and metrics. Set-valued points use Jaccard
// distance 1 - J; vectors use Euclidean distance; unit vectors (LSF) use
// the inner product.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairnn {

using TokenSet = std::vector<std::uint32_t>;  ///< sorted, distinct tokens
using Vector = std::vector<double>;

inline double jaccard_similarity(const TokenSet& a, const TokenSet& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t i = 0, j = 0, both = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++both;
            ++i;
            ++j;
        }
    }
    return static_cast<double>(both) / static_cast<double>(a.size() + b.size() - both);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Sorts and deduplicates a token list in place.
inline TokenSet normalize_tokens(TokenSet s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

struct JaccardSpace {
    using Point = TokenSet;
    static constexpr const char* name = "jaccard";

    static double distance(const Point& a, const Point& b) { return 1.0 - jaccard_similarity(a, b); }
    /// Similarity thresholds (as used for set data) become distance radii.
    static double radius_from_similarity(double s) { return 1.0 - s; }
};

struct EuclideanSpace {
    using Point = Vector;
    static constexpr const char* name = "euclidean";

    static double distance(const Point& a, const Point& b) { return std::sqrt(squared_distance(a, b)); }
};

}  // namespace fairnn
