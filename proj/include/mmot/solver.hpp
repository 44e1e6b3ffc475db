#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mmot/costs.hpp"
#include "mmot/extended_real.hpp"
#include "mmot/measures.hpp"
#include "mmot/plan.hpp"
#include "mmot/simplex.hpp"

namespace mmot {

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Method { exact_lp, entropic, brute_force };

inline const char* to_string(Method m) {
    switch (m) {
        case Method::exact_lp: return "exact-lp";
        case Method::entropic: return "entropic";
        case Method::brute_force: return "brute-force";
    }
    return "unknown";
}

struct SolveResult {
    TransportPlan plan;
    ExtendedReal value;
    Method method = Method::exact_lp;
    double primal_residual = 0.0;  // max marginal violation of the plan
    // exact-lp: LP dual certificate.
    std::optional<double> dual_objective;
    double duality_gap = 0.0;
    double max_dual_violation = 0.0;
    // Dual variables per (marginal, atom) from the certificate; empty when none.
    std::vector<std::vector<double>> dual_potentials;
    bool certified = false;
    // entropic only.
    double regularized_value = 0.0;
    std::size_t iterations = 0;
    bool converged = true;
};

struct ExactOptions {
    std::size_t budget = 2'000'000;  // maximal number of LP variables m^N
    lp::Options lp{};
};

inline double pow_size(std::size_t m, int n) {
    double t = 1.0;
    for (int i = 0; i < n; ++i) t *= static_cast<double>(m);
    return t;
}

inline TransportPlan product_plan(const DiscreteMeasure& rho, int n_marginals) {
    std::vector<PlanEntry> entries;
    IndexTuple t(static_cast<std::size_t>(n_marginals), 0);
    do {
        double w = 1.0;
        for (std::size_t a : t) w *= rho.weight(a);
        entries.push_back({t, w});
    } while (next_tuple(t, rho.size()));
    return TransportPlan(rho, n_marginals, std::move(entries));
}

// Exact C(rho) (or C_alpha(rho) for a truncated cost) by linear programming over the N-fold
// transportation polytope. Tuples of infinite cost are removed from the program; when nothing
// feasible remains the value is +inf and the plan returned is the product coupling.
inline SolveResult solve_exact(const DiscreteMeasure& rho, int n_marginals, const RepulsiveCost& cost,
                               const ExactOptions& options = {}) {
    if (n_marginals < 2) throw std::invalid_argument("solve_exact: N must be at least 2");
    const std::size_t m = rho.size();
    if (pow_size(m, n_marginals) > static_cast<double>(options.budget)) {
        std::ostringstream msg;
        msg << "solve_exact: " << m << "^" << n_marginals << " variables exceed the budget of " << options.budget
            << "; use fewer atoms or the entropic solver";
        throw BudgetExceeded(msg.str());
    }
    const auto n = static_cast<std::size_t>(n_marginals);
    const AtomCostTable table(rho, cost);

    // Rows: all atoms of marginal 0, atoms 0..m-2 of marginals 1..N-1 (the dropped rows are implied
    // by total mass).
    auto row_of = [&](std::size_t i, std::size_t a) -> int {
        if (i == 0) return static_cast<int>(a);
        if (a + 1 == m) return -1;
        return static_cast<int>(m + (i - 1) * (m - 1) + a);
    };
    std::vector<double> rhs;
    for (std::size_t a = 0; a < m; ++a) rhs.push_back(rho.weight(a));
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t a = 0; a + 1 < m; ++a) rhs.push_back(rho.weight(a));

    lp::Problem problem(rhs);
    std::vector<IndexTuple> tuples;
    IndexTuple t(n, 0);
    std::vector<std::pair<int, double>> col;
    do {
        const ExtendedReal c = table.tuple(t);
        if (c.is_infinite()) continue;
        col.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const int r = row_of(i, t[i]);
            if (r >= 0) col.emplace_back(r, 1.0);
        }
        problem.add_column(c.value(), col.begin(), col.end());
        tuples.push_back(t);
    } while (next_tuple(t, m));

    SolveResult result;
    result.method = Method::exact_lp;
    if (tuples.empty()) {
        result.plan = product_plan(rho, n_marginals);
        result.value = ExtendedReal::infinity();
        result.certified = true;
        return result;
    }

    const lp::Solution sol = lp::solve(problem, options.lp);
    if (sol.status == lp::Status::infeasible) {
        result.plan = product_plan(rho, n_marginals);
        result.value = ExtendedReal::infinity();
        result.primal_residual = result.plan.marginal_residual();
        result.certified = true;
        result.iterations = sol.iterations;
        return result;
    }
    if (sol.status != lp::Status::optimal) {
        throw SolverFailure(std::string("solve_exact: simplex stopped with status ") + lp::to_string(sol.status));
    }

    std::vector<PlanEntry> entries;
    for (std::size_t j = 0; j < tuples.size(); ++j) {
        if (sol.x[j] > 0.0) entries.push_back({tuples[j], sol.x[j]});
    }
    result.plan = TransportPlan(rho, n_marginals, std::move(entries));
    result.value = plan_cost(result.plan, cost);
    result.primal_residual = result.plan.marginal_residual();
    result.dual_objective = sol.dual_objective;
    result.duality_gap = std::abs(result.value.value() - sol.dual_objective);
    result.max_dual_violation = sol.max_dual_violation;
    result.iterations = sol.iterations;
    result.dual_potentials.assign(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < m; ++a) {
            const int r = row_of(i, a);
            if (r >= 0) result.dual_potentials[i][a] = sol.y[static_cast<std::size_t>(r)];
        }
    const double scale = 1.0 + std::abs(result.value.value());
    result.certified = result.duality_gap <= 1e-8 * scale && sol.max_dual_violation <= 1e-9 * scale &&
                       result.primal_residual <= 1e-9;
    return result;
}

struct EntropicOptions {
    double tolerance = 1e-8;  // max marginal residual
    std::size_t max_tensor = 4'000'000;
    // Anneal from the cost cap down to epsilon, halving each stage and warm-starting the potentials.
    bool epsilon_scaling = true;
    double stage_tolerance = 1e-6;
    // Project the final scaling iterate onto the exact marginal constraints.
    bool round_to_marginals = false;
};

// Multimarginal iterative proportional scaling in the log domain on the Gibbs kernel
// exp(-c_alpha / eps) relative to the product measure rho^{(x)N}. Each sweep updates the N scaling
// potentials in turn so that the corresponding marginal is matched exactly. max_iters bounds the
// total number of sweeps over all annealing stages.
inline SolveResult solve_entropic(const DiscreteMeasure& rho, int n_marginals, const RepulsiveCost& cost,
                                  double epsilon, std::size_t max_iters, const EntropicOptions& options = {}) {
    if (!cost.is_truncated()) {
        throw std::invalid_argument("solve_entropic: requires a truncated (bounded) cost");
    }
    if (!(epsilon > 0.0)) throw std::domain_error("solve_entropic: epsilon must be positive");
    if (n_marginals < 2) throw std::invalid_argument("solve_entropic: N must be at least 2");
    const std::size_t m = rho.size();
    const auto n = static_cast<std::size_t>(n_marginals);
    if (pow_size(m, n_marginals) > static_cast<double>(options.max_tensor)) {
        throw BudgetExceeded("solve_entropic: dense kernel exceeds the tensor budget");
    }
    const AtomCostTable table(rho, cost);
    const std::size_t total = static_cast<std::size_t>(pow_size(m, n_marginals));

    std::vector<double> c(total);
    std::vector<std::size_t> digits(total * n);
    {
        IndexTuple t(n, 0);
        std::size_t z = 0;
        do {
            c[z] = table.tuple(t).value();
            std::copy(t.begin(), t.end(), digits.begin() + static_cast<std::ptrdiff_t>(z * n));
            ++z;
        } while (next_tuple(t, m));
    }
    std::vector<double> logw(m);
    for (std::size_t a = 0; a < m; ++a) logw[a] = std::log(rho.weight(a));

    std::vector<std::vector<double>> f(n, std::vector<double>(m, 0.0));
    std::vector<double> expo(total);
    double eps = epsilon;
    auto fill_exponent = [&](std::size_t skip) {
        for (std::size_t z = 0; z < total; ++z) {
            const std::size_t* d = &digits[z * n];
            double s = -c[z];
            double lw = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                lw += logw[d[j]];
                if (j != skip) s += f[j][d[j]];
            }
            expo[z] = s / eps + lw;
        }
    };
    auto marginal_lse = [&](std::size_t i, std::vector<double>& out) {
        std::vector<double> mx(m, -std::numeric_limits<double>::infinity());
        for (std::size_t z = 0; z < total; ++z) {
            const std::size_t a = digits[z * n + i];
            mx[a] = std::max(mx[a], expo[z]);
        }
        std::vector<double> acc(m, 0.0);
        for (std::size_t z = 0; z < total; ++z) {
            const std::size_t a = digits[z * n + i];
            acc[a] += std::exp(expo[z] - mx[a]);
        }
        out.resize(m);
        for (std::size_t a = 0; a < m; ++a) out[a] = mx[a] + std::log(acc[a]);
    };

    SolveResult result;
    result.method = Method::entropic;
    std::vector<double> lse;
    const std::size_t none = n;
    double residual = std::numeric_limits<double>::infinity();
    std::size_t it = 0;
    auto run_stage = [&](double tol) {
        residual = std::numeric_limits<double>::infinity();
        while (it < max_iters) {
            for (std::size_t i = 0; i < n; ++i) {
                fill_exponent(i);
                marginal_lse(i, lse);
                // Exponent with f_i added back is f_i / eps + lse; matching marginal i requires
                // exp(f_i / eps + lse - log w) = 1 after removing the log w_i already inside lse.
                for (std::size_t a = 0; a < m; ++a) f[i][a] = -eps * (lse[a] - logw[a]);
            }
            ++it;
            fill_exponent(none);
            residual = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                marginal_lse(i, lse);
                for (std::size_t a = 0; a < m; ++a)
                    residual = std::max(residual, std::abs(std::exp(lse[a]) - rho.weight(a)));
            }
            if (residual <= tol) return;
        }
    };
    std::vector<double> stages;
    if (options.epsilon_scaling) {
        for (double e = 2.0 * epsilon; e < cost.cap(); e *= 2.0) stages.push_back(e);
        std::reverse(stages.begin(), stages.end());
    }
    for (double e : stages) {
        eps = e;
        run_stage(std::max(options.tolerance, options.stage_tolerance));
    }
    eps = epsilon;
    run_stage(options.tolerance);

    fill_exponent(none);
    std::vector<double> p(total);
    for (std::size_t z = 0; z < total; ++z) p[z] = std::exp(expo[z]);
    if (options.round_to_marginals) {
        // Shrink each marginal to at most rho, then add the product of the deficits (rescaled to the
        // missing mass). The result lies exactly on the transport polytope.
        std::vector<double> marg(m);
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(marg.begin(), marg.end(), 0.0);
            for (std::size_t z = 0; z < total; ++z) marg[digits[z * n + i]] += p[z];
            for (std::size_t a = 0; a < m; ++a) marg[a] = marg[a] > rho.weight(a) ? rho.weight(a) / marg[a] : 1.0;
            for (std::size_t z = 0; z < total; ++z) p[z] *= marg[digits[z * n + i]];
        }
        std::vector<std::vector<double>> deficit(n, std::vector<double>(m));
        long double mass = 0.0L;
        for (double v : p) mass += v;
        const double missing = 1.0 - static_cast<double>(mass);
        if (missing > 0.0) {
            for (std::size_t i = 0; i < n; ++i) {
                std::fill(marg.begin(), marg.end(), 0.0);
                for (std::size_t z = 0; z < total; ++z) marg[digits[z * n + i]] += p[z];
                for (std::size_t a = 0; a < m; ++a) deficit[i][a] = std::max(0.0, rho.weight(a) - marg[a]);
            }
            const double scale = std::pow(missing, 1.0 - static_cast<double>(n));
            for (std::size_t z = 0; z < total; ++z) {
                double add = scale;
                for (std::size_t j = 0; j < n; ++j) add *= deficit[j][digits[z * n + j]];
                p[z] += add;
            }
        }
    }
    std::vector<PlanEntry> entries;
    entries.reserve(total);
    long double transport = 0.0L, kl = 0.0L;
    for (std::size_t z = 0; z < total; ++z) {
        if (!(p[z] > 0.0)) continue;
        IndexTuple t(digits.begin() + static_cast<std::ptrdiff_t>(z * n),
                     digits.begin() + static_cast<std::ptrdiff_t>((z + 1) * n));
        double lprod = 0.0;
        for (std::size_t a : t) lprod += logw[a];
        transport += static_cast<long double>(p[z]) * c[z];
        kl += static_cast<long double>(p[z]) * (std::log(p[z]) - lprod);
        entries.push_back({std::move(t), p[z]});
    }
    result.plan = TransportPlan(rho, n_marginals, std::move(entries));
    result.value = ExtendedReal(static_cast<double>(transport));
    result.regularized_value = static_cast<double>(transport + epsilon * kl);
    result.primal_residual = result.plan.marginal_residual();
    result.iterations = it;
    result.converged = residual <= options.tolerance;
    return result;
}

// Exact optimum for N = 2 and uniform weights by enumerating permutation couplings.
inline SolveResult brute_force_assignment(const DiscreteMeasure& rho, int n_marginals, const RepulsiveCost& cost) {
    const std::size_t m = rho.size();
    if (n_marginals != 2) throw PreconditionError("brute_force_assignment: requires N = 2");
    if (m > 8) throw PreconditionError("brute_force_assignment: at most 8 atoms");
    for (std::size_t a = 0; a < m; ++a) {
        if (std::abs(rho.weight(a) - 1.0 / static_cast<double>(m)) > 1e-12) {
            throw PreconditionError("brute_force_assignment: weights must be uniform");
        }
    }
    const AtomCostTable table(rho, cost);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<std::size_t> best = perm;
    ExtendedReal best_value = ExtendedReal::infinity();
    do {
        double s = 0.0;
        bool finite = true;
        for (std::size_t a = 0; a < m && finite; ++a) {
            const double v = table.pair(a, perm[a]);
            if (std::isinf(v)) finite = false;
            else s += v;
        }
        if (!finite) continue;
        const ExtendedReal v(s / static_cast<double>(m));
        if (v < best_value) {
            best_value = v;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<PlanEntry> entries;
    for (std::size_t a = 0; a < m; ++a) entries.push_back({{a, best[a]}, 1.0 / static_cast<double>(m)});
    SolveResult r;
    r.method = Method::brute_force;
    r.plan = TransportPlan(rho, 2, std::move(entries));
    r.value = best_value;
    r.primal_residual = r.plan.marginal_residual();
    r.certified = true;
    return r;
}

// all_coordinates: |x^i_j - x^k_s| > beta for every j, s whenever i != k.
// cross_coordinates: only for j != s; this weaker form is the one a mass-counting argument guarantees.
enum class SeparationRule { all_coordinates, cross_coordinates };

namespace detail {

inline bool tuples_separated(const DiscreteMeasure& rho, const IndexTuple& s, const IndexTuple& t, double beta,
                             SeparationRule rule) {
    for (std::size_t j = 0; j < s.size(); ++j)
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (rule == SeparationRule::cross_coordinates && j == k) continue;
            if (!(distance(rho.position(s[j]), rho.position(t[k])) > beta)) return false;
        }
    return true;
}

inline bool extend_selection(const DiscreteMeasure& rho, const std::vector<const IndexTuple*>& pool, double beta,
                             SeparationRule rule, std::size_t target, std::vector<const IndexTuple*>& chosen) {
    if (chosen.size() == target) return true;
    for (const IndexTuple* cand : pool) {
        bool ok = true;
        for (const IndexTuple* c : chosen) {
            if (!tuples_separated(rho, *c, *cand, beta, rule)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        chosen.push_back(cand);
        if (extend_selection(rho, pool, beta, rule, target, chosen)) return true;
        chosen.pop_back();
    }
    return false;
}

}  // namespace detail

// Picks x^2, ..., x^N in the support so that the coordinates of each selected tuple are farther than
// beta from those of every other selected tuple (per `rule`). First-fit in lexicographic order with
// backtracking; returns x^1 followed by the selected tuples.
inline std::vector<IndexTuple> select_separated_points(const TransportPlan& plan, const IndexTuple& x1, double beta,
                                                       double mass_threshold = 1e-9,
                                                       SeparationRule rule = SeparationRule::all_coordinates) {
    const auto& rho = plan.marginal();
    const int n = plan.n_marginals();
    if (!(beta > 0.0)) throw std::domain_error("select_separated_points: beta must be positive");
    if (!(concentration(rho, beta).value < concentration_threshold(n))) {
        throw PreconditionError("select_separated_points: mu(beta) is not below 1/(N(N-1)^2)");
    }
    std::vector<const IndexTuple*> pool;
    bool found = false;
    for (const auto& e : plan.entries()) {
        if (e.weight <= mass_threshold) continue;
        if (e.indices == x1) found = true;
        pool.push_back(&e.indices);
    }
    if (!found) throw PreconditionError("select_separated_points: x1 is not in the support");
    std::vector<const IndexTuple*> chosen{&x1};
    if (!detail::extend_selection(rho, pool, beta, rule, static_cast<std::size_t>(n), chosen)) {
        std::ostringstream msg;
        msg << "select_separated_points: no separated family exists in the support (support size " << pool.size()
            << ", beta " << beta << ")";
        throw SolverFailure(msg.str());
    }
    std::vector<IndexTuple> out;
    for (const IndexTuple* c : chosen) out.push_back(*c);
    return out;
}

}  // namespace mmot
