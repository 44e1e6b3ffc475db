#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmot/costs.hpp"
#include "mmot/measures.hpp"
#include "mmot/plan.hpp"
#include "mmot/simplex.hpp"
#include "mmot/solver.hpp"

namespace mmot {

// Dual variables for the symmetric problem: one value per atom, optionally an N-tuple of shifted copies.
struct PotentialSet {
    DiscreteMeasure marginal;
    int n_marginals = 2;
    std::vector<double> u;
    std::optional<std::vector<std::vector<double>>> tuple;
    bool canonical = false;
    // Diagnostics filled by the producing operation.
    double fixed_point_residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool assumption_A = true;

    // N * sum_a rho(a) u(a)
    double objective() const {
        long double s = 0.0L;
        for (std::size_t a = 0; a < u.size(); ++a) s += static_cast<long double>(marginal.weight(a)) * u[a];
        return static_cast<double>(static_cast<long double>(n_marginals) * s);
    }
};

// max over all atom tuples of sum_i u(a_i) - c(a); tuples of infinite cost impose nothing.
inline double max_dual_violation(const PotentialSet& pot, const RepulsiveCost& cost) {
    const AtomCostTable table(pot.marginal, cost);
    const std::size_t m = pot.marginal.size();
    IndexTuple t(static_cast<std::size_t>(pot.n_marginals), 0);
    double worst = -std::numeric_limits<double>::infinity();
    do {
        const ExtendedReal c = table.tuple(t);
        if (c.is_infinite()) continue;
        double s = 0.0;
        for (std::size_t a : t) s += pot.u[a];
        worst = std::max(worst, s - c.value());
    } while (next_sorted_tuple(t, m));
    return worst;
}

// Maximizes N sum_a rho(a) u(a) subject to sum_i u(a_i) <= c_alpha(a) for every atom tuple.
// The cost is permutation symmetric, so only nondecreasing tuples are constrained. The program is
// solved through its own dual (a transport problem over multisets) whose simplex multipliers are u.
inline PotentialSet solve_dual(const DiscreteMeasure& rho, int n_marginals, const RepulsiveCost& cost,
                               const lp::Options& lp_options = {}) {
    if (!cost.is_truncated()) {
        throw std::invalid_argument("solve_dual: requires a truncated (bounded) cost");
    }
    if (n_marginals < 2) throw std::invalid_argument("solve_dual: N must be at least 2");
    const std::size_t m = rho.size();
    const auto n = static_cast<std::size_t>(n_marginals);
    const AtomCostTable table(rho, cost);
    std::vector<double> rhs(m);
    for (std::size_t a = 0; a < m; ++a) rhs[a] = static_cast<double>(n) * rho.weight(a);
    lp::Problem problem(rhs);
    IndexTuple t(n, 0);
    std::vector<std::pair<int, double>> col;
    do {
        col.clear();
        for (std::size_t a : t) {
            if (!col.empty() && col.back().first == static_cast<int>(a)) col.back().second += 1.0;
            else col.emplace_back(static_cast<int>(a), 1.0);
        }
        problem.add_column(table.tuple(t).value(), col.begin(), col.end());
    } while (next_sorted_tuple(t, m));

    const lp::Solution sol = lp::solve(problem, lp_options);
    if (sol.status == lp::Status::unbounded) {
        throw SolverFailure("solve_dual: unbounded dual for a bounded cost");
    }
    if (sol.status != lp::Status::optimal) {
        throw SolverFailure(std::string("solve_dual: simplex stopped with status ") + lp::to_string(sol.status));
    }
    PotentialSet pot;
    pot.marginal = rho;
    pot.n_marginals = n_marginals;
    pot.u = sol.y;
    pot.iterations = sol.iterations;
    pot.assumption_A = check_assumption_A(rho, n_marginals);
    return pot;
}

namespace detail {

// inf over nondecreasing (N-1)-tuples Y of atoms of head(Y) + c(Y) - sum_j u(Y_j),
// where head(Y) is the interaction of the free point with Y.
template <class Head>
double infimal_convolution(const AtomCostTable& table, const std::vector<double>& u, std::size_t others,
                           Head&& head) {
    const std::size_t m = table.size();
    IndexTuple y(others, 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double s = 0.0;
        bool finite = true;
        for (std::size_t j = 0; j < others && finite; ++j) {
            const double h = head(y[j]);
            if (std::isinf(h)) {
                finite = false;
                break;
            }
            s += h - u[y[j]];
            for (std::size_t k = j + 1; k < others; ++k) {
                const double v = table.pair(y[j], y[k]);
                if (std::isinf(v)) {
                    finite = false;
                    break;
                }
                s += v;
            }
        }
        if (finite) best = std::min(best, s);
    } while (next_sorted_tuple(y, m));
    return best;
}

inline std::vector<double> improvement_map(const AtomCostTable& table, const std::vector<double>& u,
                                           std::size_t others) {
    std::vector<double> bar(u.size());
    for (std::size_t a = 0; a < u.size(); ++a) {
        bar[a] = infimal_convolution(table, u, others, [&](std::size_t b) { return table.pair(a, b); });
    }
    return bar;
}

}  // namespace detail

// Iterates u <- (ubar + (N-1) u) / N with ubar(x) = inf_Y c(x, Y) - sum_j u(Y_j) over atom tuples,
// until the sup-norm change is at most `tolerance` or `max_iterations` is reached. Starting from a
// feasible u every iterate stays feasible and increases pointwise.
inline PotentialSet canonicalize(const PotentialSet& pot, const RepulsiveCost& cost, double tolerance = 1e-10,
                                 std::size_t max_iterations = 10'000) {
    const AtomCostTable table(pot.marginal, cost);
    const auto others = static_cast<std::size_t>(pot.n_marginals - 1);
    const double n = pot.n_marginals;
    PotentialSet out = pot;
    out.tuple.reset();
    std::size_t it = 0;
    double change = std::numeric_limits<double>::infinity();
    while (it < max_iterations && change > tolerance) {
        const auto bar = detail::improvement_map(table, out.u, others);
        change = 0.0;
        for (std::size_t a = 0; a < out.u.size(); ++a) {
            const double next = (bar[a] + (n - 1.0) * out.u[a]) / n;
            change = std::max(change, std::abs(next - out.u[a]));
            out.u[a] = next;
        }
        ++it;
    }
    const auto bar = detail::improvement_map(table, out.u, others);
    double residual = 0.0;
    for (std::size_t a = 0; a < out.u.size(); ++a) residual = std::max(residual, std::abs(bar[a] - out.u[a]));
    out.fixed_point_residual = residual;
    out.iterations = it;
    out.canonical = change <= tolerance;
    return out;
}

// u(x) = inf over atom (N-1)-tuples Y of c(x, Y) - sum_j u(Y_j): the canonical potential on all of R^d.
inline double extend_potential(const PotentialSet& pot, const RepulsiveCost& cost, const Point& x) {
    if (x.size() != pot.marginal.dimension()) {
        throw std::invalid_argument("extend_potential: dimension mismatch");
    }
    const AtomCostTable table(pot.marginal, cost);
    return detail::infimal_convolution(table, pot.u, static_cast<std::size_t>(pot.n_marginals - 1),
                                       [&](std::size_t b) {
                                           const double t = distance(x, pot.marginal.position(b));
                                           const ExtendedReal v = phi(cost, t);
                                           return v.is_infinite() ? std::numeric_limits<double>::infinity()
                                                                  : v.value();
                                       });
}

// Batch evaluation reusing one cost table.
inline std::vector<double> extend_potential(const PotentialSet& pot, const RepulsiveCost& cost,
                                            const std::vector<Point>& xs) {
    const AtomCostTable table(pot.marginal, cost);
    std::vector<double> out;
    out.reserve(xs.size());
    for (const auto& x : xs) {
        out.push_back(detail::infimal_convolution(
            table, pot.u, static_cast<std::size_t>(pot.n_marginals - 1), [&](std::size_t b) {
                const ExtendedReal v = phi(cost, distance(x, pot.marginal.position(b)));
                return v.is_infinite() ? std::numeric_limits<double>::infinity() : v.value();
            }));
    }
    return out;
}

struct SlacknessReport {
    double max_residual = 0.0;       // max over support of c - sum u
    double min_residual = 0.0;       // negative values expose dual infeasibility on the support
    double weighted_residual = 0.0;  // sum over support of weight * (c - sum u)
    std::size_t support_size = 0;
    bool pass = false;
};

// Residuals c(x) - sum_i u(x_i) on support entries heavier than `mass_threshold`.
inline SlacknessReport check_complementary_slackness(const TransportPlan& plan, const PotentialSet& pot,
                                                     const RepulsiveCost& cost, double mass_threshold = 1e-9,
                                                     double tolerance = 1e-7) {
    if (plan.marginal().size() != pot.u.size() || plan.n_marginals() != pot.n_marginals) {
        throw std::invalid_argument("check_complementary_slackness: plan and potential disagree");
    }
    const AtomCostTable table(plan.marginal(), cost);
    SlacknessReport r;
    r.max_residual = -std::numeric_limits<double>::infinity();
    r.min_residual = std::numeric_limits<double>::infinity();
    long double weighted = 0.0L;
    for (const auto& e : plan.entries()) {
        if (e.weight <= mass_threshold) continue;
        const ExtendedReal c = table.tuple(e.indices);
        double s = 0.0;
        for (std::size_t a : e.indices) s += pot.u[a];
        const double res = c.is_infinite() ? std::numeric_limits<double>::infinity() : c.value() - s;
        r.max_residual = std::max(r.max_residual, res);
        r.min_residual = std::min(r.min_residual, res);
        weighted += static_cast<long double>(e.weight) * res;
        ++r.support_size;
    }
    if (r.support_size == 0) {
        r.max_residual = r.min_residual = 0.0;
    }
    r.weighted_residual = static_cast<double>(weighted);
    r.pass = r.max_residual <= tolerance && r.min_residual >= -tolerance;
    return r;
}

// u_i = u + shift_i with sum_i shift_i = 0.
inline PotentialSet tuple_from_symmetric(const PotentialSet& pot, const std::vector<double>& shifts,
                                         const RepulsiveCost& cost) {
    if (shifts.size() != static_cast<std::size_t>(pot.n_marginals)) {
        throw std::invalid_argument("tuple_from_symmetric: one shift per marginal required");
    }
    double total = 0.0;
    for (double s : shifts) total += s;
    if (std::abs(total) > 1e-12) throw std::invalid_argument("tuple_from_symmetric: shifts must sum to 0");
    // sum_i u_i(a_i) = sum_i u(a_i) + sum_i shift_i, so tuple feasibility is symmetric feasibility.
    if (max_dual_violation(pot, cost) > 1e-9) {
        throw std::invalid_argument("tuple_from_symmetric: shifted tuple is infeasible");
    }
    PotentialSet out = pot;
    std::vector<std::vector<double>> tuple;
    for (double s : shifts) {
        std::vector<double> ui = pot.u;
        for (double& v : ui) v += s;
        tuple.push_back(std::move(ui));
    }
    out.tuple = std::move(tuple);
    return out;
}

// Shifts with u_i(xbar_i) = c(xbar) / N at a support tuple xbar (exact when c(xbar) = sum_i u(xbar_i));
// any complementary-slackness residual is spread evenly so that the shifts sum to zero.
inline std::vector<double> normalizing_shifts(const PotentialSet& pot, const RepulsiveCost& cost,
                                              const IndexTuple& xbar) {
    const AtomCostTable table(pot.marginal, cost);
    const ExtendedReal c = table.tuple(xbar);
    if (c.is_infinite()) throw std::invalid_argument("normalizing_shifts: support tuple has infinite cost");
    const double n = pot.n_marginals;
    std::vector<double> shifts;
    double mean = 0.0;
    for (std::size_t a : xbar) {
        shifts.push_back(c.value() / n - pot.u[a]);
        mean += shifts.back();
    }
    mean /= n;
    for (double& s : shifts) s -= mean;
    return shifts;
}

}  // namespace mmot
