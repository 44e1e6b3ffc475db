#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mmot {

using Point = std::vector<double>;

inline double distance(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return std::sqrt(s);
}

struct Atom {
    Point position;
    double weight = 0.0;
};

inline constexpr double kWeightSumTolerance = 1e-12;
inline constexpr double kMergeTolerance = 1e-12;

// Finitely supported probability measure on R^d. Immutable after construction.
class DiscreteMeasure {
public:
    DiscreteMeasure() = default;

    // Atoms closer than kMergeTolerance are merged by summing weights.
    DiscreteMeasure(std::size_t dimension, std::vector<Atom> atoms) : dimension_(dimension) {
        if (dimension == 0) {
            throw std::invalid_argument("DiscreteMeasure: dimension must be positive");
        }
        if (atoms.empty()) {
            throw std::invalid_argument("DiscreteMeasure: no atoms");
        }
        double total = 0.0;
        for (auto& a : atoms) {
            if (a.position.size() != dimension) {
                throw std::invalid_argument("DiscreteMeasure: atom dimension mismatch");
            }
            if (!(a.weight > 0.0) || !std::isfinite(a.weight)) {
                throw std::invalid_argument("DiscreteMeasure: weights must be strictly positive");
            }
            for (double c : a.position) {
                if (!std::isfinite(c)) {
                    throw std::invalid_argument("DiscreteMeasure: non-finite coordinate");
                }
            }
            total += a.weight;
            auto same = std::find_if(atoms_.begin(), atoms_.end(), [&](const Atom& b) {
                return distance(a.position, b.position) <= kMergeTolerance;
            });
            if (same != atoms_.end()) {
                same->weight += a.weight;
            } else {
                atoms_.push_back(std::move(a));
            }
        }
        if (std::abs(total - 1.0) > kWeightSumTolerance) {
            throw std::invalid_argument("DiscreteMeasure: weights must sum to 1");
        }
    }

    // Rescales positive masses to a probability before validation.
    static DiscreteMeasure normalized(std::size_t dimension, std::vector<Atom> atoms) {
        long double total = 0.0L;
        for (const auto& a : atoms) total += a.weight;
        if (!(total > 0.0L)) {
            throw std::invalid_argument("DiscreteMeasure: total mass must be positive");
        }
        for (auto& a : atoms) a.weight = static_cast<double>(a.weight / total);
        return DiscreteMeasure(dimension, std::move(atoms));
    }

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return atoms_.size(); }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const Atom& operator[](std::size_t i) const { return atoms_[i]; }
    const Point& position(std::size_t i) const { return atoms_[i].position; }
    double weight(std::size_t i) const { return atoms_[i].weight; }

    std::vector<double> weights() const {
        std::vector<double> w;
        w.reserve(atoms_.size());
        for (const auto& a : atoms_) w.push_back(a.weight);
        return w;
    }

    double max_weight() const {
        double m = 0.0;
        for (const auto& a : atoms_) m = std::max(m, a.weight);
        return m;
    }

    double min_pairwise_distance() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            for (std::size_t j = i + 1; j < atoms_.size(); ++j)
                m = std::min(m, distance(atoms_[i].position, atoms_[j].position));
        return m;
    }

    double diameter() const {
        double m = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i)
            for (std::size_t j = i + 1; j < atoms_.size(); ++j)
                m = std::max(m, distance(atoms_[i].position, atoms_[j].position));
        return m;
    }

    // Same atoms listed in the given order.
    DiscreteMeasure permuted(const std::vector<std::size_t>& order) const {
        std::vector<Atom> a;
        a.reserve(order.size());
        for (std::size_t i : order) a.push_back(atoms_.at(i));
        return DiscreteMeasure(dimension_, std::move(a));
    }

private:
    std::size_t dimension_ = 0;
    std::vector<Atom> atoms_;
};

// 1 / (N (N-1)^2): the concentration level below which no atom is forced into self-interaction.
inline double concentration_threshold(int n_marginals) {
    if (n_marginals < 2) {
        throw std::invalid_argument("number of marginals must be at least 2");
    }
    const double n = n_marginals;
    return 1.0 / (n * (n - 1.0) * (n - 1.0));
}

enum class Exactness { exact, lower_bound };

struct ConcentrationValue {
    double value = 0.0;
    Exactness exactness = Exactness::exact;
};

// Evaluates r -> sup_x rho(B(x, r)) over open balls.
//
// d = 1: sliding window of strict length 2r over the sorted atoms.
// d >= 2: a set of atoms fits in an open ball of radius r iff its minimum enclosing ball has
// radius < r, and that ball is the circumsphere (within its affine hull) of at most d + 1 of
// its atoms. Candidate centers are therefore the circumcenters of all affinely independent
// subsets of size <= d + 1. When that enumeration would exceed `max_candidates`, only atoms
// and pair midpoints are used and the result is a lower bound.
class ConcentrationFunction {
public:
    explicit ConcentrationFunction(const DiscreteMeasure& rho, std::size_t max_candidates = 2'000'000)
        : rho_(&rho) {
        if (rho.dimension() == 1) {
            sorted_.reserve(rho.size());
            for (const auto& a : rho.atoms()) sorted_.emplace_back(a.position[0], a.weight);
            std::sort(sorted_.begin(), sorted_.end());
            return;
        }
        const std::size_t m = rho.size();
        const std::size_t max_subset = std::min(rho.dimension() + 1, m);
        double count = 0.0;
        for (std::size_t k = 1; k <= max_subset; ++k) count += binomial(m, k);
        exactness_ = count <= static_cast<double>(max_candidates) ? Exactness::exact : Exactness::lower_bound;
        const std::size_t subset_limit = exactness_ == Exactness::exact ? max_subset : std::min<std::size_t>(2, m);
        std::vector<std::size_t> idx;
        enumerate_subsets(0, subset_limit, idx);
        std::sort(candidates_.begin(), candidates_.end(),
                  [](const Candidate& a, const Candidate& b) { return a.radius < b.radius; });
    }

    ConcentrationValue operator()(double r) const {
        if (!(r > 0.0)) {
            throw std::domain_error("concentration: radius must be positive");
        }
        if (rho_->dimension() == 1) {
            double best = 0.0;
            double window = 0.0;
            std::size_t lo = 0;
            for (std::size_t hi = 0; hi < sorted_.size(); ++hi) {
                window += sorted_[hi].second;
                while (sorted_[hi].first - sorted_[lo].first >= 2.0 * r) {
                    window -= sorted_[lo].second;
                    ++lo;
                }
                best = std::max(best, window);
            }
            return {std::min(best, 1.0), Exactness::exact};
        }
        double best = 0.0;
        for (const auto& c : candidates_) {
            if (c.radius >= r) break;
            double mass = 0.0;
            for (const auto& a : rho_->atoms()) {
                if (distance(a.position, c.center) < r) mass += a.weight;
            }
            best = std::max(best, mass);
        }
        return {std::min(best, 1.0), exactness_};
    }

    Exactness exactness() const { return rho_->dimension() == 1 ? Exactness::exact : exactness_; }

private:
    struct Candidate {
        Point center;
        double radius;
    };

    static double binomial(std::size_t n, std::size_t k) {
        double r = 1.0;
        for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
        return r;
    }

    void enumerate_subsets(std::size_t start, std::size_t limit, std::vector<std::size_t>& idx) {
        if (!idx.empty()) add_circumcenter(idx);
        if (idx.size() == limit) return;
        for (std::size_t i = start; i < rho_->size(); ++i) {
            idx.push_back(i);
            enumerate_subsets(i + 1, limit, idx);
            idx.pop_back();
        }
    }

    void add_circumcenter(const std::vector<std::size_t>& idx) {
        const Point& p0 = rho_->position(idx[0]);
        const std::size_t d = rho_->dimension();
        if (idx.size() == 1) {
            candidates_.push_back({p0, 0.0});
            return;
        }
        const auto k = static_cast<Eigen::Index>(idx.size() - 1);
        Eigen::MatrixXd edges(static_cast<Eigen::Index>(d), k);
        for (Eigen::Index j = 0; j < k; ++j) {
            const Point& pj = rho_->position(idx[static_cast<std::size_t>(j) + 1]);
            for (std::size_t c = 0; c < d; ++c) edges(static_cast<Eigen::Index>(c), j) = pj[c] - p0[c];
        }
        const Eigen::MatrixXd gram = edges.transpose() * edges;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        if (lu.rank() < k) return;  // affinely dependent
        const Eigen::VectorXd rhs = 0.5 * gram.diagonal();
        const Eigen::VectorXd lambda = lu.solve(rhs);
        const Eigen::VectorXd offset = edges * lambda;
        Point center(p0);
        for (std::size_t c = 0; c < d; ++c) center[c] += offset(static_cast<Eigen::Index>(c));
        candidates_.push_back({std::move(center), offset.norm()});
    }

    const DiscreteMeasure* rho_;
    std::vector<std::pair<double, double>> sorted_;
    std::vector<Candidate> candidates_;
    Exactness exactness_ = Exactness::exact;
};

inline ConcentrationValue concentration(const DiscreteMeasure& rho, double r) {
    return ConcentrationFunction(rho)(r);
}

struct ConcentrationProfile {
    std::vector<double> radii;
    std::vector<double> values;
    std::vector<Exactness> exactness;
};

inline ConcentrationProfile concentration_profile(const DiscreteMeasure& rho, std::vector<double> radii) {
    if (!std::is_sorted(radii.begin(), radii.end())) {
        throw std::invalid_argument("concentration_profile: radii must be increasing");
    }
    ConcentrationFunction mu(rho);
    ConcentrationProfile p;
    for (double r : radii) {
        const auto v = mu(r);
        p.values.push_back(v.value);
        p.exactness.push_back(v.exactness);
    }
    p.radii = std::move(radii);
    return p;
}

// For atomic measures lim_{r->0} mu(r) is the largest atom mass.
inline bool check_assumption_A(const DiscreteMeasure& rho, int n_marginals) {
    return rho.max_weight() < concentration_threshold(n_marginals);
}

// Largest beta with mu(beta) < 1 / (N (N-1)^2), located by bisection to relative tolerance 1e-9.
// The returned value always satisfies the strict inequality.
inline std::optional<double> find_beta(const DiscreteMeasure& rho, int n_marginals, double rel_tol = 1e-9) {
    const double threshold = concentration_threshold(n_marginals);
    if (!check_assumption_A(rho, n_marginals)) {
        return std::nullopt;
    }
    ConcentrationFunction mu(rho);
    // No open ball of radius min_gap / 2 holds two atoms.
    double lo = 0.5 * rho.min_pairwise_distance();
    double hi = rho.diameter() + 1.0;
    while (hi - lo > rel_tol * lo) {
        const double mid = 0.5 * (lo + hi);
        if (mu(mid).value < threshold) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

// Atomic l1 distance: sum over the union of supports of |w1(x) - w2(x)|.
inline double l1_distance(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.dimension() != b.dimension()) {
        throw std::invalid_argument("l1_distance: dimension mismatch");
    }
    std::vector<bool> matched(b.size(), false);
    double total = 0.0;
    for (const auto& x : a.atoms()) {
        double wb = 0.0;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (!matched[j] && distance(x.position, b.position(j)) <= kMergeTolerance) {
                matched[j] = true;
                wb = b.weight(j);
                break;
            }
        }
        total += std::abs(x.weight - wb);
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
        if (!matched[j]) total += b.weight(j);
    }
    return total;
}

// Volume of the unit ball in R^d.
inline double unit_ball_volume(std::size_t d) {
    const double h = 0.5 * static_cast<double>(d);
    return std::pow(std::numbers::pi, h) / std::tgamma(h + 1.0);
}

struct HistogramCell {
    Point min;
    Point max;
    double value = 0.0;

    double volume() const {
        double v = 1.0;
        for (std::size_t k = 0; k < min.size(); ++k) v *= max[k] - min[k];
        return v;
    }
    double diagonal() const { return distance(min, max); }
    Point center() const {
        Point c(min.size());
        for (std::size_t k = 0; k < min.size(); ++k) c[k] = 0.5 * (min[k] + max[k]);
        return c;
    }
};

// Piecewise-constant probability density on axis-aligned cells.
class HistogramDensity {
public:
    HistogramDensity(std::size_t dimension, std::vector<HistogramCell> cells)
        : dimension_(dimension), cells_(std::move(cells)) {
        if (dimension == 0 || cells_.empty()) {
            throw std::invalid_argument("HistogramDensity: empty");
        }
        double mass = 0.0;
        for (const auto& c : cells_) {
            if (c.min.size() != dimension || c.max.size() != dimension) {
                throw std::invalid_argument("HistogramDensity: cell dimension mismatch");
            }
            for (std::size_t k = 0; k < dimension; ++k) {
                if (!(c.max[k] > c.min[k])) {
                    throw std::invalid_argument("HistogramDensity: degenerate cell");
                }
            }
            if (c.value < 0.0) {
                throw std::invalid_argument("HistogramDensity: negative density");
            }
            mass += c.value * c.volume();
        }
        if (std::abs(mass - 1.0) > 1e-9) {
            throw std::invalid_argument("HistogramDensity: density must integrate to 1");
        }
    }

    std::size_t dimension() const { return dimension_; }
    const std::vector<HistogramCell>& cells() const { return cells_; }

    double max_cell_diagonal() const {
        double m = 0.0;
        for (const auto& c : cells_) m = std::max(m, c.diagonal());
        return m;
    }

    // Each cell's mass placed at its center.
    DiscreteMeasure discretize() const {
        std::vector<Atom> atoms;
        for (const auto& c : cells_) {
            const double mass = c.value * c.volume();
            if (mass > 0.0) atoms.push_back({c.center(), mass});
        }
        return DiscreteMeasure::normalized(dimension_, std::move(atoms));
    }

    // Splits every cell into 2^d congruent children.
    HistogramDensity refined() const {
        std::vector<HistogramCell> out;
        const std::size_t children = std::size_t{1} << dimension_;
        for (const auto& c : cells_) {
            const Point mid = c.center();
            for (std::size_t mask = 0; mask < children; ++mask) {
                HistogramCell child{c.min, c.max, c.value};
                for (std::size_t k = 0; k < dimension_; ++k) {
                    if (mask & (std::size_t{1} << k)) child.min[k] = mid[k];
                    else child.max[k] = mid[k];
                }
                out.push_back(std::move(child));
            }
        }
        return HistogramDensity(dimension_, std::move(out));
    }

private:
    std::size_t dimension_;
    std::vector<HistogramCell> cells_;
};

inline double histogram_lp_norm(const HistogramDensity& density, double p) {
    if (!(p > 1.0)) {
        throw std::domain_error("histogram_lp_norm: p must exceed 1");
    }
    double s = 0.0;
    for (const auto& c : density.cells()) s += std::pow(std::abs(c.value), p) * c.volume();
    return std::pow(s, 1.0 / p);
}

}  // namespace mmot
