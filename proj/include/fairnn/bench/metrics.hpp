#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <vector>

#include "fairnn/set_family.hpp"

namespace fairnn::bench {

/// 1/2 sum |mu(x) - nu(x)| over the union of both supports. Inputs are
/// probabilities.
inline double total_variation(const std::map<ElementId, double>& mu, const std::map<ElementId, double>& nu) {
    double s = 0;
    auto a = mu.begin();
    auto b = nu.begin();
    while (a != mu.end() || b != nu.end()) {
        if (b == nu.end() || (a != mu.end() && a->first < b->first)) {
            s += std::abs(a->second);
            ++a;
        } else if (a == mu.end() || b->first < a->first) {
            s += std::abs(b->second);
            ++b;
        } else {
            s += std::abs(a->second - b->second);
            ++a;
            ++b;
        }
    }
    return s / 2;
}

/// TVD between the empirical law of `counts` and the uniform law on
/// `support`. Outputs outside the support count fully against uniformity.
inline double tvd_to_uniform(const std::map<ElementId, std::size_t>& counts,
                             const std::vector<ElementId>& support) {
    if (support.empty()) return 0.0;
    double total = 0;
    for (const auto& [x, c] : counts) total += static_cast<double>(c);
    std::map<ElementId, double> emp, uni;
    if (total > 0) {
        for (const auto& [x, c] : counts) emp[x] = static_cast<double>(c) / total;
    }
    for (ElementId x : support) uni[x] = 1.0 / static_cast<double>(support.size());
    return total_variation(emp, uni);
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    if (v.size() % 2) return v[mid];
    const double hi = v[mid];
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lo + hi) / 2;
}

}  // namespace fairnn::bench
