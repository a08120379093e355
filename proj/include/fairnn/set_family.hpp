#pragma once

// Ground-set bookkeeping shared by all union-of-sets samplers: the random
// rank permutation and the rank-sorted storage of each set.
//
// Each set is stored as an ascending array of ranks (not element ids), so
// a rank window [lo, hi) of a set is a contiguous slice found by two
// binary searches. Swapping the ranks of two elements touches only the
// sets that contain exactly one of them; sets containing both keep the
// same rank multiset.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "fairnn/random.hpp"

namespace fairnn {

using ElementId = std::uint32_t;
using Rank = std::uint32_t;
using SetId = std::uint32_t;

class FamilyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A permutation of the element ids [0, n) together with its inverse.
class GroundSet {
public:
    GroundSet() = default;

    /// Uniformly random permutation (Fisher-Yates via std::shuffle).
    GroundSet(std::size_t n, Rng& rng) : element_at_rank_(n) {
        std::iota(element_at_rank_.begin(), element_at_rank_.end(), ElementId{0});
        std::shuffle(element_at_rank_.begin(), element_at_rank_.end(), rng);
        rebuild_inverse();
    }

    /// Adopts an explicit rank order; element_at_rank[r] is the element with rank r.
    static GroundSet from_order(std::vector<ElementId> element_at_rank) {
        GroundSet g;
        g.element_at_rank_ = std::move(element_at_rank);
        g.rank_of_.assign(g.element_at_rank_.size(), kUnset);
        for (std::size_t r = 0; r < g.element_at_rank_.size(); ++r) {
            const ElementId x = g.element_at_rank_[r];
            if (x >= g.rank_of_.size() || g.rank_of_[x] != kUnset) {
                throw FamilyError("rank order is not a permutation of [0, n)");
            }
            g.rank_of_[x] = static_cast<Rank>(r);
        }
        return g;
    }

    std::size_t size() const { return element_at_rank_.size(); }
    Rank rank_of(ElementId x) const { return rank_of_[x]; }
    ElementId element_at(Rank r) const { return element_at_rank_[r]; }
    std::span<const ElementId> order() const { return element_at_rank_; }

    void swap(ElementId x, ElementId y) {
        std::swap(rank_of_[x], rank_of_[y]);
        element_at_rank_[rank_of_[x]] = x;
        element_at_rank_[rank_of_[y]] = y;
    }

    bool is_bijection() const {
        if (rank_of_.size() != element_at_rank_.size()) return false;
        for (std::size_t r = 0; r < element_at_rank_.size(); ++r) {
            const ElementId x = element_at_rank_[r];
            if (x >= rank_of_.size() || rank_of_[x] != r) return false;
        }
        return true;
    }

    bool operator==(const GroundSet&) const = default;

private:
    static constexpr Rank kUnset = ~Rank{0};

    void rebuild_inverse() {
        rank_of_.assign(element_at_rank_.size(), 0);
        for (std::size_t r = 0; r < element_at_rank_.size(); ++r) {
            rank_of_[element_at_rank_[r]] = static_cast<Rank>(r);
        }
    }

    std::vector<Rank> rank_of_;
    std::vector<ElementId> element_at_rank_;
};

/// A family of sets over the ground set [0, n), each set kept sorted by
/// current rank, with O(1) expected membership and element -> sets links.
class RankedFamily {
public:
    RankedFamily() = default;

    /// Draws a random permutation from `seed` and stores every set by rank.
    /// A second stream derived from the same seed drives rank perturbation.
    static RankedFamily build(std::size_t n_elements,
                              const std::vector<std::vector<ElementId>>& sets,
                              std::uint64_t seed) {
        Rng perm_rng(derive_seed(seed, 1));
        GroundSet ground(n_elements, perm_rng);
        return RankedFamily(std::move(ground), sets, derive_seed(seed, 2));
    }

    /// Same as build() but with a caller-chosen rank order.
    static RankedFamily build_with_order(const std::vector<std::vector<ElementId>>& sets,
                                         std::vector<ElementId> element_at_rank,
                                         std::uint64_t perturb_seed = 0) {
        return RankedFamily(GroundSet::from_order(std::move(element_at_rank)), sets,
                            derive_seed(perturb_seed, 2));
    }

    std::size_t num_elements() const { return ground_.size(); }
    std::size_t num_sets() const { return sets_.size(); }
    std::size_t set_size(SetId s) const { return sets_[s].size(); }

    /// m: sum of all set sizes.
    std::size_t total_size() const { return total_size_; }

    /// delta: the largest number of sets sharing one element.
    std::size_t max_multiplicity() const {
        std::size_t best = 0;
        for (const auto& l : set_of_element_) best = std::max(best, l.size());
        return best;
    }

    const GroundSet& ground() const { return ground_; }
    Rank rank_of(ElementId x) const { return ground_.rank_of(x); }

    /// Stored ranks of set s, ascending.
    std::span<const Rank> ranks(SetId s) const { return sets_[s]; }

    ElementId element_at_position(SetId s, std::size_t pos) const {
        return ground_.element_at(sets_[s][pos]);
    }

    bool contains(SetId s, ElementId x) const {
        const auto& links = set_of_element_[x];
        if (links.size() <= kShortLinks) return std::find(links.begin(), links.end(), s) != links.end();
        return membership_.count(member_key(s, x)) != 0;
    }

    std::span<const SetId> sets_of(ElementId x) const { return set_of_element_[x]; }

    /// Positions [first, last) of set s whose ranks fall in [lo, hi).
    std::pair<std::size_t, std::size_t> rank_window(SetId s, Rank lo, Rank hi) const {
        const auto& v = sets_[s];
        const auto b = std::lower_bound(v.begin(), v.end(), lo);
        const auto e = std::lower_bound(b, v.end(), hi);
        return {static_cast<std::size_t>(b - v.begin()), static_cast<std::size_t>(e - v.begin())};
    }

    std::size_t rank_count(SetId s, Rank lo, Rank hi) const {
        const auto [b, e] = rank_window(s, lo, hi);
        return e - b;
    }

    /// Members of set s with rank in [lo, hi), in rank order.
    std::vector<ElementId> rank_range(SetId s, Rank lo, Rank hi) const {
        const auto [b, e] = rank_window(s, lo, hi);
        std::vector<ElementId> out;
        out.reserve(e - b);
        for (std::size_t i = b; i < e; ++i) out.push_back(ground_.element_at(sets_[s][i]));
        return out;
    }

    /// Exchanges the ranks of x and y and restores rank order in every
    /// set holding exactly one of them.
    void swap_ranks(ElementId x, ElementId y) {
        if (x == y) return;
        const Rank rx = ground_.rank_of(x);
        const Rank ry = ground_.rank_of(y);
        for (SetId s : set_of_element_[x]) {
            if (!contains(s, y)) replace_rank(s, rx, ry);
        }
        for (SetId s : set_of_element_[y]) {
            if (!contains(s, x)) replace_rank(s, ry, rx);
        }
        ground_.swap(x, y);
    }

    /// Stream used by the rank-perturbing samplers.
    Rng& perturbation_rng() { return perturb_rng_; }
    const Rng& perturbation_rng() const { return perturb_rng_; }
    void set_perturbation_rng(const Rng& rng) { perturb_rng_ = rng; }

    /// Full-scan check of the bijection, per-set sortedness, membership and
    /// element -> set links.
    bool check_invariants() const {
        if (!ground_.is_bijection()) return false;
        std::size_t links = 0;
        for (const auto& l : set_of_element_) links += l.size();
        std::size_t total = 0;
        for (SetId s = 0; s < sets_.size(); ++s) {
            const auto& v = sets_[s];
            total += v.size();
            if (!std::is_sorted(v.begin(), v.end())) return false;
            if (std::adjacent_find(v.begin(), v.end()) != v.end()) return false;
            for (Rank r : v) {
                if (!contains(s, ground_.element_at(r))) return false;
            }
        }
        return total == links && total == total_size_ && membership_.size() == total;
    }

    bool operator==(const RankedFamily& o) const {
        return ground_ == o.ground_ && sets_ == o.sets_ && set_of_element_ == o.set_of_element_ &&
               perturb_rng_ == o.perturb_rng_;
    }

private:
    RankedFamily(GroundSet ground, const std::vector<std::vector<ElementId>>& sets,
                 std::uint64_t perturb_seed)
        : ground_(std::move(ground)), perturb_rng_(perturb_seed) {
        const std::size_t n = ground_.size();
        sets_.resize(sets.size());
        set_of_element_.resize(n);
        for (SetId s = 0; s < sets.size(); ++s) {
            auto& ranks = sets_[s];
            ranks.reserve(sets[s].size());
            for (ElementId x : sets[s]) {
                if (x >= n) {
                    throw FamilyError("element id " + std::to_string(x) + " in set " +
                                      std::to_string(s) + " is outside [0, " +
                                      std::to_string(n) + ")");
                }
                ranks.push_back(ground_.rank_of(x));
            }
            std::sort(ranks.begin(), ranks.end());
            ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());
            total_size_ += ranks.size();
        }
        membership_.reserve(total_size_);
        for (SetId s = 0; s < sets_.size(); ++s) {
            for (Rank r : sets_[s]) {
                const ElementId x = ground_.element_at(r);
                membership_.insert(member_key(s, x));
                set_of_element_[x].push_back(s);
            }
        }
    }

    // Elements in at most this many sets answer membership by scanning
    // their link list instead of hashing.
    static constexpr std::size_t kShortLinks = 8;

    static std::uint64_t member_key(SetId s, ElementId x) {
        return (static_cast<std::uint64_t>(s) << 32) | x;
    }

    // Moves `from` to `to` inside the rank-sorted array of set s.
    void replace_rank(SetId s, Rank from, Rank to) {
        auto& v = sets_[s];
        auto it = std::lower_bound(v.begin(), v.end(), from);
        if (to > from) {
            auto dest = std::lower_bound(it + 1, v.end(), to);
            std::rotate(it, it + 1, dest);
            *(dest - 1) = to;
        } else {
            auto dest = std::lower_bound(v.begin(), it, to);
            std::rotate(dest, it, it + 1);
            *dest = to;
        }
    }

    GroundSet ground_;
    std::vector<std::vector<Rank>> sets_;
    std::unordered_set<std::uint64_t> membership_;
    std::vector<std::vector<SetId>> set_of_element_;
    std::size_t total_size_ = 0;
    Rng perturb_rng_;
};

}  // namespace fairnn
