#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mmot/extended_real.hpp"
#include "mmot/measures.hpp"

namespace mmot {

enum class CostKind { power, table };

// Radial repulsive profile phi: continuous, strictly decreasing, blowing up at 0.
// Either phi(t) = t^-s or a monotone table interpolated with a Fritsch-Carlson cubic.
// An optional truncation level alpha replaces phi by min(phi, phi(alpha)).
class RepulsiveCost {
public:
    static RepulsiveCost power(double exponent, std::optional<double> truncation = std::nullopt) {
        if (!(exponent > 0.0) || !std::isfinite(exponent)) {
            throw std::invalid_argument("RepulsiveCost: power exponent must be positive");
        }
        RepulsiveCost c;
        c.kind_ = CostKind::power;
        c.exponent_ = exponent;
        c.set_truncation(truncation);
        return c;
    }

    // Points (t, phi(t)) with t > 0 strictly increasing and phi strictly decreasing and positive.
    // Outside the table phi is continued by power laws matching value and slope at the end points.
    static RepulsiveCost table(std::vector<std::pair<double, double>> points,
                               std::optional<double> truncation = std::nullopt) {
        if (points.size() < 2) {
            throw std::invalid_argument("RepulsiveCost: table needs at least two points");
        }
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (!(points[i].first > 0.0) || !(points[i].second > 0.0)) {
                throw std::invalid_argument("RepulsiveCost: table entries must be positive");
            }
            if (i > 0 && !(points[i].first > points[i - 1].first)) {
                throw std::invalid_argument("RepulsiveCost: table abscissae must be strictly increasing");
            }
            if (i > 0 && !(points[i].second < points[i - 1].second)) {
                throw std::invalid_argument("RepulsiveCost: table values must be strictly decreasing");
            }
        }
        RepulsiveCost c;
        c.kind_ = CostKind::table;
        c.points_ = std::move(points);
        c.build_slopes();
        c.set_truncation(truncation);
        return c;
    }

    CostKind kind() const { return kind_; }
    double exponent() const { return exponent_; }
    const std::vector<std::pair<double, double>>& table_points() const { return points_; }
    std::optional<double> truncation() const { return truncation_; }
    bool is_truncated() const { return truncation_.has_value(); }

    RepulsiveCost truncated_at(double alpha) const {
        RepulsiveCost c = *this;
        c.set_truncation(alpha);
        return c;
    }
    RepulsiveCost untruncated() const {
        RepulsiveCost c = *this;
        c.truncation_.reset();
        return c;
    }

    // Untruncated profile at t > 0.
    double raw(double t) const {
        if (kind_ == CostKind::power) {
            return std::pow(t, -exponent_);
        }
        const auto& p = points_;
        if (t <= p.front().first) {
            return p.front().second * std::pow(p.front().first / t, head_exponent_);
        }
        if (t >= p.back().first) {
            return p.back().second * std::pow(p.back().first / t, tail_exponent_);
        }
        const auto it = std::upper_bound(p.begin(), p.end(), t,
                                         [](double v, const auto& q) { return v < q.first; });
        const std::size_t i = static_cast<std::size_t>(it - p.begin()) - 1;
        const double h = p[i + 1].first - p[i].first;
        const double s = (t - p[i].first) / h;
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
        const double h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s);
        const double h11 = s * s * (s - 1);
        return h00 * p[i].second + h10 * h * slopes_[i] + h01 * p[i + 1].second + h11 * h * slopes_[i + 1];
    }

    // Profile with truncation applied, t > 0.
    double operator()(double t) const {
        const double v = raw(t);
        return truncation_ ? std::min(v, cap_) : v;
    }

    // phi(alpha) when truncated.
    double cap() const { return cap_; }

    // Inverse of the untruncated profile.
    double inverse(double v) const {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw std::domain_error("phi_inverse: value outside the range of phi");
        }
        if (kind_ == CostKind::power) {
            return std::pow(v, -1.0 / exponent_);
        }
        // Bracket then bisect; raw() is strictly decreasing.
        double lo = points_.front().first;
        double hi = points_.back().first;
        while (raw(lo) < v) lo *= 0.5;
        while (raw(hi) > v) hi *= 2.0;
        while (hi - lo > 1e-12 * std::max(1.0, lo)) {
            const double mid = 0.5 * (lo + hi);
            if (raw(mid) > v) lo = mid;
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    }

private:
    RepulsiveCost() = default;

    void set_truncation(std::optional<double> alpha) {
        if (alpha) {
            if (!(*alpha > 0.0) || !std::isfinite(*alpha)) {
                throw std::invalid_argument("RepulsiveCost: truncation level must be positive");
            }
            cap_ = raw(*alpha);
        }
        truncation_ = alpha;
    }

    // Fritsch-Carlson monotone slopes.
    void build_slopes() {
        const auto& p = points_;
        const std::size_t n = p.size();
        std::vector<double> delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            delta[i] = (p[i + 1].second - p[i].second) / (p[i + 1].first - p[i].first);
        }
        slopes_.assign(n, 0.0);
        slopes_[0] = delta[0];
        slopes_[n - 1] = delta[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) slopes_[i] = 0.5 * (delta[i - 1] + delta[i]);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double a = slopes_[i] / delta[i];
            const double b = slopes_[i + 1] / delta[i];
            const double r = a * a + b * b;
            if (r > 9.0) {
                const double tau = 3.0 / std::sqrt(r);
                slopes_[i] = tau * a * delta[i];
                slopes_[i + 1] = tau * b * delta[i];
            }
        }
        head_exponent_ = std::max(-p.front().first * slopes_.front() / p.front().second, 1e-3);
        tail_exponent_ = std::max(-p.back().first * slopes_.back() / p.back().second, 1e-3);
    }

    CostKind kind_ = CostKind::power;
    double exponent_ = 1.0;
    std::vector<std::pair<double, double>> points_;
    std::vector<double> slopes_;
    double head_exponent_ = 1.0;
    double tail_exponent_ = 1.0;
    std::optional<double> truncation_;
    double cap_ = 0.0;
};

// phi(t) honoring truncation; +inf at t = 0 when untruncated.
inline ExtendedReal phi(const RepulsiveCost& cost, double t) {
    if (t < 0.0 || std::isnan(t)) {
        throw std::domain_error("phi: negative argument");
    }
    if (t == 0.0) {
        return cost.is_truncated() ? ExtendedReal(cost.cap()) : ExtendedReal::infinity();
    }
    return ExtendedReal(cost(t));
}

inline double phi_inverse(const RepulsiveCost& cost, double v) { return cost.inverse(v); }

// N^2 (N-1) / 2
inline double separation_multiplier(int n_marginals) {
    const double n = n_marginals;
    return n * n * (n - 1.0) / 2.0;
}

// phi^{-1}(N^2 (N-1)/2 * phi(beta)): optimal plans keep every pair of particles at least this far apart.
inline double alpha_star(const RepulsiveCost& cost, int n_marginals, double beta) {
    if (n_marginals < 2) {
        throw std::invalid_argument("alpha_star: N must be at least 2");
    }
    if (!(beta > 0.0)) {
        throw std::domain_error("alpha_star: beta must be positive");
    }
    return cost.inverse(separation_multiplier(n_marginals) * cost.raw(beta));
}

// sum_{i<j} phi(|x_i - x_j|), using the cost's truncation when `truncated` is set.
inline ExtendedReal pairwise_cost(const RepulsiveCost& cost, std::span<const Point> x, bool truncated) {
    if (truncated && !cost.is_truncated()) {
        throw std::invalid_argument("pairwise_cost: truncated evaluation requires a truncation level");
    }
    const RepulsiveCost& c = cost;
    ExtendedReal total(0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            if (x[i].size() != x[j].size()) {
                throw std::invalid_argument("pairwise_cost: dimension mismatch");
            }
            const double t = distance(x[i], x[j]);
            if (truncated) {
                total += ExtendedReal(t == 0.0 ? c.cap() : c(t));
            } else {
                total += t == 0.0 ? ExtendedReal::infinity() : ExtendedReal(c.raw(t));
            }
        }
    }
    return total;
}

// sup_{s>t} |phi'(s)| for phi(s) = s^-e: e * t^(-e-1).
inline double lipschitz_bound(const RepulsiveCost& cost, double t) {
    if (cost.kind() != CostKind::power) {
        throw std::invalid_argument("lipschitz_bound: only available for power-law costs");
    }
    if (!(t > 0.0)) throw std::domain_error("lipschitz_bound: t must be positive");
    const double e = cost.exponent();
    return e * std::pow(t, -e - 1.0);
}

// sup_{s>t} (phi''(s) - phi'(s)/s) for phi(s) = s^-e: e (e + 2) t^(-e-2).
inline double semiconcavity_bound(const RepulsiveCost& cost, double t) {
    if (cost.kind() != CostKind::power) {
        throw std::invalid_argument("semiconcavity_bound: only available for power-law costs");
    }
    if (!(t > 0.0)) throw std::domain_error("semiconcavity_bound: t must be positive");
    const double e = cost.exponent();
    return e * (e + 2.0) * std::pow(t, -e - 2.0);
}

}  // namespace mmot
