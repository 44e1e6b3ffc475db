#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mmot/costs.hpp"
#include "mmot/extended_real.hpp"
#include "mmot/measures.hpp"

namespace mmot {

using IndexTuple = std::vector<std::size_t>;

struct PlanEntry {
    IndexTuple indices;
    double weight = 0.0;
};

// Sparse nonnegative tensor on the N-fold product of the marginal's atoms.
// Entries are kept in lexicographic order of their index tuples, one entry per tuple.
class TransportPlan {
public:
    TransportPlan() = default;

    TransportPlan(DiscreteMeasure marginal, int n_marginals, std::vector<PlanEntry> entries)
        : marginal_(std::move(marginal)), n_(n_marginals) {
        if (n_marginals < 2) throw std::invalid_argument("TransportPlan: N must be at least 2");
        std::map<IndexTuple, double> merged;
        for (auto& e : entries) {
            if (e.indices.size() != static_cast<std::size_t>(n_marginals)) {
                throw std::invalid_argument("TransportPlan: index tuple length differs from N");
            }
            for (std::size_t a : e.indices) {
                if (a >= marginal_.size()) throw std::out_of_range("TransportPlan: atom index out of range");
            }
            if (e.weight < 0.0 || !std::isfinite(e.weight)) {
                throw std::invalid_argument("TransportPlan: negative entry");
            }
            if (e.weight > 0.0) merged[e.indices] += e.weight;
        }
        entries_.reserve(merged.size());
        for (auto& [k, w] : merged) entries_.push_back({k, w});
    }

    const DiscreteMeasure& marginal() const { return marginal_; }
    int n_marginals() const { return n_; }
    const std::vector<PlanEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    double mass() const {
        long double s = 0.0L;
        for (const auto& e : entries_) s += e.weight;
        return static_cast<double>(s);
    }

    // i-th one-dimensional marginal as a weight vector over atoms.
    std::vector<double> marginal_weights(int i) const {
        std::vector<long double> acc(marginal_.size(), 0.0L);
        for (const auto& e : entries_) acc[e.indices[static_cast<std::size_t>(i)]] += e.weight;
        return {acc.begin(), acc.end()};
    }

    // max_{i, a} |(pi^i_# P)(a) - rho(a)|
    double marginal_residual() const {
        double r = 0.0;
        for (int i = 0; i < n_; ++i) {
            const auto w = marginal_weights(i);
            for (std::size_t a = 0; a < w.size(); ++a) r = std::max(r, std::abs(w[a] - marginal_.weight(a)));
        }
        return r;
    }

    std::vector<Point> positions(const IndexTuple& t) const {
        std::vector<Point> x;
        x.reserve(t.size());
        for (std::size_t a : t) x.push_back(marginal_.position(a));
        return x;
    }

private:
    DiscreteMeasure marginal_;
    int n_ = 2;
    std::vector<PlanEntry> entries_;
};

// Pairwise profile values between atoms; the diagonal is +inf unless the cost is truncated.
class AtomCostTable {
public:
    AtomCostTable(const DiscreteMeasure& rho, const RepulsiveCost& cost)
        : m_(rho.size()), truncated_(cost.is_truncated()), table_(m_ * m_, 0.0) {
        for (std::size_t a = 0; a < m_; ++a) {
            for (std::size_t b = 0; b < m_; ++b) {
                if (a == b) {
                    table_[a * m_ + b] = truncated_ ? cost.cap() : std::numeric_limits<double>::infinity();
                } else {
                    table_[a * m_ + b] = cost(distance(rho.position(a), rho.position(b)));
                }
            }
        }
    }

    std::size_t size() const { return m_; }
    bool truncated() const { return truncated_; }
    double pair(std::size_t a, std::size_t b) const { return table_[a * m_ + b]; }

    // Cost of a tuple; +inf when untruncated and some index repeats.
    ExtendedReal tuple(const IndexTuple& t) const {
        double s = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            for (std::size_t j = i + 1; j < t.size(); ++j) {
                const double v = pair(t[i], t[j]);
                if (std::isinf(v)) return ExtendedReal::infinity();
                s += v;
            }
        }
        return ExtendedReal(s);
    }

private:
    std::size_t m_;
    bool truncated_;
    std::vector<double> table_;
};

// Odometer over {0..m-1}^N in lexicographic order.
inline bool next_tuple(IndexTuple& t, std::size_t m) {
    for (std::size_t k = t.size(); k-- > 0;) {
        if (++t[k] < m) return true;
        t[k] = 0;
    }
    return false;
}

// Odometer over nondecreasing tuples (multisets) of {0..m-1}.
inline bool next_sorted_tuple(IndexTuple& t, std::size_t m) {
    for (std::size_t k = t.size(); k-- > 0;) {
        if (t[k] + 1 < m) {
            const std::size_t v = t[k] + 1;
            for (std::size_t j = k; j < t.size(); ++j) t[j] = v;
            return true;
        }
    }
    return false;
}

// Integral of the cost against the plan; +inf if the plan charges an infinite-cost tuple.
inline ExtendedReal plan_cost(const TransportPlan& plan, const RepulsiveCost& cost) {
    const AtomCostTable table(plan.marginal(), cost);
    long double s = 0.0L;
    for (const auto& e : plan.entries()) {
        const ExtendedReal c = table.tuple(e.indices);
        if (c.is_infinite()) return ExtendedReal::infinity();
        s += static_cast<long double>(e.weight) * c.value();
    }
    return ExtendedReal(static_cast<double>(s));
}

// Smallest interparticle distance over entries heavier than `mass_threshold`: the largest alpha with
// (thresholded) support disjoint from the diagonal strip D_alpha. +inf for an empty support.
inline double min_interparticle_gap(const TransportPlan& plan, double mass_threshold = 0.0) {
    double gap = std::numeric_limits<double>::infinity();
    const auto& rho = plan.marginal();
    for (const auto& e : plan.entries()) {
        if (e.weight <= mass_threshold) continue;
        for (std::size_t i = 0; i < e.indices.size(); ++i)
            for (std::size_t j = i + 1; j < e.indices.size(); ++j)
                gap = std::min(gap, distance(rho.position(e.indices[i]), rho.position(e.indices[j])));
    }
    return gap;
}

// Average of the plan over all N! coordinate permutations.
inline TransportPlan symmetrize(const TransportPlan& plan) {
    const auto n = static_cast<std::size_t>(plan.n_marginals());
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<std::vector<std::size_t>> perms;
    do perms.push_back(perm);
    while (std::next_permutation(perm.begin(), perm.end()));
    const double scale = 1.0 / static_cast<double>(perms.size());
    std::vector<PlanEntry> out;
    out.reserve(plan.size() * perms.size());
    for (const auto& e : plan.entries()) {
        for (const auto& p : perms) {
            IndexTuple t(n);
            for (std::size_t k = 0; k < n; ++k) t[k] = e.indices[p[k]];
            out.push_back({std::move(t), e.weight * scale});
        }
    }
    return TransportPlan(plan.marginal(), plan.n_marginals(), std::move(out));
}

}  // namespace mmot
