#pragma once

// Goodness-of-fit helpers shared by the self-test and the experiment
// drivers.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fairnn/random.hpp"
#include "fairnn/set_family.hpp"

namespace fairnn::bench {

/// Upper-tail p-value of Pearson's statistic against equal expected counts.
inline double chi_square_uniform_p(const std::vector<std::size_t>& counts) {
    if (counts.size() < 2) return 1.0;
    double total = 0;
    for (auto c : counts) total += static_cast<double>(c);
    if (total == 0) return 0.0;
    const double expected = total / static_cast<double>(counts.size());
    double stat = 0;
    for (auto c : counts) {
        const double d = static_cast<double>(c) - expected;
        stat += d * d / expected;
    }
    boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
    return boost::math::cdf(boost::math::complement(dist, stat));
}

/// Binomial standard deviation of an empirical frequency.
inline double binomial_sigma(double p, std::size_t trials) {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

/// Largest |P(a, b) - m(a) m(b)| over all pairs of consecutive outputs,
/// in units of the binomial sigma of m(a) m(b). `seq` holds indices into
/// [0, m.size()); `m` is the reference marginal.
inline double lag1_max_z(const std::vector<std::uint32_t>& seq, const std::vector<double>& m) {
    const std::size_t n = m.size();
    const std::size_t pairs = seq.size() - 1;
    std::vector<double> joint(n * n, 0);
    for (std::size_t i = 0; i < pairs; ++i) joint[seq[i] * n + seq[i + 1]] += 1;
    double worst = 0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double e = m[a] * m[b];
            if (e <= 0 || e >= 1) continue;
            const double s = std::sqrt(e * (1 - e) / static_cast<double>(pairs));
            worst = std::max(worst, std::abs(joint[a * n + b] / static_cast<double>(pairs) - e) / s);
        }
    }
    return worst;
}

/// Empirical marginal of `seq` over [0, n).
inline std::vector<double> empirical_marginal(const std::vector<std::uint32_t>& seq, std::size_t n) {
    std::vector<double> m(n, 0);
    for (auto x : seq) m[x] += 1;
    for (auto& v : m) v /= static_cast<double>(seq.size());
    return m;
}

/// g random subsets of [0, n) covering [0, n); every set also takes a
/// random prefix of its predecessor so that degrees differ.
template <class Gen>
std::vector<std::vector<ElementId>> random_overlapping_family(std::size_t n, std::size_t g, Gen& gen) {
    std::vector<std::vector<ElementId>> sets(g);
    for (ElementId x = 0; x < n; ++x) sets[uniform_index(gen, g)].push_back(x);
    for (std::size_t s = 0; s < g; ++s) {
        const auto prev = sets[(s + g - 1) % g];
        const std::size_t extra = uniform_index(gen, prev.size() + 1);
        sets[s].insert(sets[s].end(), prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(extra));
    }
    for (auto& s : sets) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    return sets;
}

}  // namespace fairnn::bench
