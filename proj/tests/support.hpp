#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <cstddef>
#include <map>
#include <vector>

namespace testsupport {

/// Upper-tail p-value of Pearson's statistic against equal expected counts.
inline double chi_square_uniform_p(const std::vector<std::size_t>& counts) {
    double total = 0;
    for (auto c : counts) total += static_cast<double>(c);
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
inline double sigma(double p, std::size_t trials) {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

template <class K>
double tvd_to_uniform(const std::map<K, std::size_t>& counts, std::size_t support) {
    double total = 0;
    for (const auto& [k, c] : counts) total += static_cast<double>(c);
    double sum = 0;
    for (const auto& [k, c] : counts) sum += std::abs(static_cast<double>(c) / total - 1.0 / support);
    sum += static_cast<double>(support - counts.size()) / static_cast<double>(support);
    return sum / 2;
}

template <class K>
double tvd_between(const std::map<K, std::size_t>& a, const std::map<K, std::size_t>& b) {
    double ta = 0, tb = 0;
    for (const auto& [k, c] : a) ta += static_cast<double>(c);
    for (const auto& [k, c] : b) tb += static_cast<double>(c);
    std::map<K, double> diff;
    for (const auto& [k, c] : a) diff[k] += static_cast<double>(c) / ta;
    for (const auto& [k, c] : b) diff[k] -= static_cast<double>(c) / tb;
    double sum = 0;
    for (const auto& [k, d] : diff) sum += std::abs(d);
    return sum / 2;
}

}  // namespace testsupport

#include <algorithm>
#include <numeric>
#include <random>

namespace testsupport {

/// g random subsets of [0, n) whose union is all of [0, n); each set also
/// picks up elements of its predecessor so that degrees vary.
template <class Gen>
std::vector<std::vector<std::uint32_t>> overlapping_sets(std::size_t n, std::size_t g, Gen& gen) {
    std::vector<std::vector<std::uint32_t>> sets(g);
    for (std::uint32_t x = 0; x < n; ++x) sets[gen() % g].push_back(x);
    for (std::size_t s = 0; s < g; ++s) {
        const auto& prev = sets[(s + g - 1) % g];
        const std::size_t extra = prev.empty() ? 0 : gen() % (prev.size() + 1);
        std::vector<std::uint32_t> add(prev.begin(), prev.begin() + static_cast<std::ptrdiff_t>(extra));
        sets[s].insert(sets[s].end(), add.begin(), add.end());
    }
    for (auto& s : sets) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    return sets;
}

inline std::vector<std::uint32_t> iota_ids(std::size_t n) {
    std::vector<std::uint32_t> v(n);
    std::iota(v.begin(), v.end(), 0u);
    return v;
}

/// max over pairs |P(a,b) - P(a)P(b)| divided by the binomial sigma of
/// P(a)P(b), for a sequence of outputs in [0, n).
inline double lag1_max_z(const std::vector<std::uint32_t>& seq, std::size_t n) {
    const std::size_t pairs = seq.size() - 1;
    std::vector<double> marg(n, 0), joint(n * n, 0);
    for (std::size_t i = 0; i < pairs; ++i) {
        marg[seq[i]] += 1;
        joint[seq[i] * n + seq[i + 1]] += 1;
    }
    double worst = 0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            const double pa = marg[a] / pairs, pb = marg[b] / pairs;
            const double expect = pa * pb;
            if (expect <= 0) continue;
            const double s = std::sqrt(expect * (1 - expect) / pairs);
            worst = std::max(worst, std::abs(joint[a * n + b] / pairs - expect) / s);
        }
    }
    return worst;
}

}  // namespace testsupport
