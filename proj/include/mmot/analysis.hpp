#pragma once

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mmot/costs.hpp"
#include "mmot/duality.hpp"
#include "mmot/measures.hpp"
#include "mmot/plan.hpp"
#include "mmot/random.hpp"
#include "mmot/simplex.hpp"
#include "mmot/solver.hpp"

namespace mmot {

enum class CheckStatus { pass, fail, skipped };

inline const char* to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::fail: return "fail";
        case CheckStatus::skipped: return "skipped";
    }
    return "unknown";
}

// One verified inequality. margin > 0 means satisfied.
struct CheckEntry {
    std::string name;
    std::string paper_ref;  // which result the inequality comes from
    double claimed = 0.0;
    double measured = 0.0;
    double margin = 0.0;
    CheckStatus status = CheckStatus::skipped;
    std::uint64_t seed = 0;
    bool diagnostic = false;  // excluded from pass/fail accounting
    std::string note;
};

struct VerificationReport {
    std::string instance;  // hash of the measure
    int n_marginals = 2;
    std::string cost;
    std::optional<double> beta;
    std::optional<double> alpha_star;
    std::vector<CheckEntry> checks;

    bool all_pass() const {
        return std::none_of(checks.begin(), checks.end(), [](const CheckEntry& c) {
            return !c.diagnostic && c.status == CheckStatus::fail;
        });
    }
    const CheckEntry* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace refs {
inline constexpr const char* kDiagonal = "optimal supports avoid D_alpha for alpha < alpha*";
inline constexpr const char* kCostBound = "C(rho) <= N^3 (N-1)^2 / 4 phi(beta)";
inline constexpr const char* kTruncation = "C(rho) = C_alpha(rho) for alpha <= alpha*";
inline constexpr const char* kDuality = "strong duality for the truncated cost";
inline constexpr const char* kTransfer = "potentials of c_alpha are potentials of c";
inline constexpr const char* kSlackness = "sum_i u(x_i) = c(x) on the support of optimal plans";
inline constexpr const char* kSupBound = "sup |u| <= N (N-1)^2 phi(alpha/2)";
inline constexpr const char* kLipschitz = "Lip(u) <= k(alpha*)";
inline constexpr const char* kSemiconcave = "Sc(u) <= K(alpha*)";
inline constexpr const char* kLp = "C(rho) <= N^3 (N-1)^2 / 4 phi(beta_p) from ||rho||_p";
inline constexpr const char* kRhoLipschitz = "|C(rho1) - C(rho2)| <= N^2 (N-1)^2 phi(alpha/2) ||rho1 - rho2||_1";
inline constexpr const char* kContinuity = "C(rho_n) -> C(rho) under small concentration";
inline constexpr const char* kEquidist = "mu_{rho_n}(delta beta) < 1/(N(N-1)^2) eventually";
inline constexpr const char* kSeparated = "separated support points exist";
inline constexpr const char* kEntropic = "entropic approximation";
}  // namespace refs

inline CheckEntry upper_bound_check(std::string name, std::string ref, double bound, double measured, double slack) {
    CheckEntry e;
    e.name = std::move(name);
    e.paper_ref = std::move(ref);
    e.claimed = bound;
    e.measured = measured;
    e.margin = bound - measured;
    e.status = measured <= bound + slack ? CheckStatus::pass : CheckStatus::fail;
    return e;
}

inline CheckEntry lower_bound_check(std::string name, std::string ref, double bound, double measured, double slack) {
    CheckEntry e;
    e.name = std::move(name);
    e.paper_ref = std::move(ref);
    e.claimed = bound;
    e.measured = measured;
    e.margin = measured - bound;
    e.status = measured >= bound - slack ? CheckStatus::pass : CheckStatus::fail;
    return e;
}

inline CheckEntry skipped_check(std::string name, std::string ref, std::string why) {
    CheckEntry e;
    e.name = std::move(name);
    e.paper_ref = std::move(ref);
    e.status = CheckStatus::skipped;
    e.note = std::move(why);
    return e;
}

// Stable 64-bit FNV-1a over N, d, positions and weights.
inline std::string instance_hash(const DiscreteMeasure& rho, int n_marginals) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t v) {
        for (int k = 0; k < 8; ++k) {
            h ^= (v >> (8 * k)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(static_cast<std::uint64_t>(n_marginals));
    mix(rho.dimension());
    for (const auto& a : rho.atoms()) {
        for (double c : a.position) mix(std::bit_cast<std::uint64_t>(c));
        mix(std::bit_cast<std::uint64_t>(a.weight));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string describe(const RepulsiveCost& cost) {
    std::ostringstream os;
    os.precision(17);
    if (cost.kind() == CostKind::power) os << "power(s=" << cost.exponent() << ")";
    else os << "table(" << cost.table_points().size() << " points)";
    if (cost.truncation()) os << " truncated at " << *cost.truncation();
    return os.str();
}

// ---------------------------------------------------------------------------------------------
// Random instances

struct GeneratorSpec {
    std::uint64_t seed = 0;
    std::size_t dimension = 1;
    std::size_t atoms = 8;
    int n_marginals = 2;
    double min_spacing = 0.02;
};

// Smallest atom count for which a measure can satisfy small concentration w.r.t. N.
inline std::size_t min_atoms_for_assumption_A(int n_marginals) {
    const double thr = concentration_threshold(n_marginals);
    return static_cast<std::size_t>(std::floor(1.0 / thr)) + 1;
}

// Caps weights at `cap` and spreads the excess proportionally over the uncapped atoms.
inline void water_fill(std::vector<double>& w, double cap) {
    for (int pass = 0; pass < 100; ++pass) {
        double excess = 0.0, free_mass = 0.0;
        for (double& v : w) {
            if (v > cap) {
                excess += v - cap;
                v = cap;
            } else if (v < cap) {
                free_mass += v;
            }
        }
        if (excess <= 0.0 || free_mass <= 0.0) return;
        for (double& v : w)
            if (v < cap) v += excess * v / free_mass;
    }
}

// Positions uniform in [0,1]^d with pairwise spacing >= min_spacing (resampling), Dirichlet(1)
// weights capped strictly below 1/(N(N-1)^2) so that small concentration holds by construction.
inline DiscreteMeasure generate_instance(const GeneratorSpec& spec) {
    const std::size_t m = spec.atoms;
    if (m < min_atoms_for_assumption_A(spec.n_marginals)) {
        throw std::invalid_argument("generate_instance: too few atoms for small concentration with this N");
    }
    Rng rng(spec.seed);
    std::vector<Point> pos;
    std::size_t attempts = 0;
    while (pos.size() < m) {
        if (++attempts > 100000) throw std::runtime_error("generate_instance: cannot place atoms");
        Point p(spec.dimension);
        for (double& c : p) c = rng.uniform();
        bool ok = true;
        for (const auto& q : pos)
            if (distance(p, q) < spec.min_spacing) ok = false;
        if (ok) pos.push_back(std::move(p));
    }
    std::vector<double> w(m);
    double total = 0.0;
    for (double& v : w) total += (v = rng.exponential() + 1e-12);
    for (double& v : w) v /= total;
    const double thr = concentration_threshold(spec.n_marginals);
    const double cap = std::max(0.5 * thr, 0.5 * (thr + 1.0 / static_cast<double>(m)));
    water_fill(w, cap);
    std::vector<Atom> atoms;
    for (std::size_t a = 0; a < m; ++a) atoms.push_back({pos[a], w[a]});
    return DiscreteMeasure::normalized(spec.dimension, std::move(atoms));
}

struct CampaignSpec {
    std::uint64_t seed = 0;
    std::size_t count = 100;
    std::vector<int> n_values{2, 3};
    std::vector<std::size_t> dimensions{1, 2};
};

// Atom-count range per N: [6, 12] for N = 2; just above the small-concentration floor otherwise.
inline std::pair<std::size_t, std::size_t> atom_range(int n_marginals) {
    if (n_marginals == 2) return {6, 12};
    const std::size_t lo = min_atoms_for_assumption_A(n_marginals);
    return {lo, lo + 2};
}

inline GeneratorSpec campaign_instance(const CampaignSpec& c, std::size_t i) {
    Rng rng(derive_seed(c.seed, i));
    GeneratorSpec g;
    g.seed = derive_seed(c.seed ^ 0x5bd1e995ULL, i);
    g.n_marginals = c.n_values[rng.index(c.n_values.size())];
    g.dimension = c.dimensions[rng.index(c.dimensions.size())];
    const auto [lo, hi] = atom_range(g.n_marginals);
    g.atoms = lo + rng.index(hi - lo + 1);
    return g;
}

// ---------------------------------------------------------------------------------------------
// Verifiers

struct VerifyOptions {
    double support_threshold = 1e-9;
    std::size_t probes = 1000;
    std::uint64_t probe_seed = 20240601;
    ExactOptions exact{};
    EntropicOptions entropic{.tolerance = 1e-6};
};

struct PotentialBoundsResult {
    std::vector<CheckEntry> entries;
    PotentialSet potential;
    std::vector<Point> probes;
    std::vector<double> probe_values;
};

// Shared per-instance state: beta, alpha*, and the certified optimum for the untruncated cost.
class InstanceVerifier {
public:
    InstanceVerifier(DiscreteMeasure rho, int n_marginals, RepulsiveCost cost, VerifyOptions options = {})
        : rho_(std::move(rho)), n_(n_marginals), cost_(cost.untruncated()), opt_(options) {
        assumption_A_ = check_assumption_A(rho_, n_);
        if (assumption_A_) {
            beta_ = find_beta(rho_, n_);
            if (beta_) alpha_star_ = alpha_star(cost_, n_, *beta_);
        }
    }

    const DiscreteMeasure& measure() const { return rho_; }
    int n_marginals() const { return n_; }
    const RepulsiveCost& cost() const { return cost_; }
    bool assumption_A() const { return assumption_A_ && beta_.has_value(); }
    std::optional<double> beta() const { return beta_; }
    std::optional<double> alpha() const { return alpha_star_; }

    const SolveResult& exact() {
        if (!exact_) exact_ = solve_exact(rho_, n_, cost_, opt_.exact);
        return *exact_;
    }
    const SolveResult& exact_truncated(double alpha) {
        for (auto& [a, r] : truncated_)
            if (a == alpha) return r;
        truncated_.emplace_back(alpha, solve_exact(rho_, n_, cost_.truncated_at(alpha), opt_.exact));
        return truncated_.back().second;
    }
    const PotentialSet& canonical_potential(double alpha) {
        for (auto& [a, p] : potentials_)
            if (a == alpha) return p;
        const auto ct = cost_.truncated_at(alpha);
        potentials_.emplace_back(alpha, canonicalize(solve_dual(rho_, n_, ct, opt_.exact.lp), ct));
        return potentials_.back().second;
    }

    VerificationReport report_header() const {
        VerificationReport r;
        r.instance = instance_hash(rho_, n_);
        r.n_marginals = n_;
        r.cost = describe(cost_);
        r.beta = beta_;
        r.alpha_star = alpha_star_;
        return r;
    }

    std::vector<CheckEntry> diagonal_avoidance() {
        if (!assumption_A()) return {skipped_check("diagonal-avoidance", refs::kDiagonal, "small concentration fails")};
        const double target = *alpha_star_ * (1.0 - 1e-6);
        std::vector<CheckEntry> out;
        const auto& ex = require_certified(exact());
        if (ex.value.is_infinite()) {
            auto e = lower_bound_check("diagonal-avoidance", refs::kDiagonal, target, 0.0, 0.0);
            e.note = "optimal value is +inf";
            out.push_back(std::move(e));
        } else {
            out.push_back(lower_bound_check("diagonal-avoidance", refs::kDiagonal, target,
                                            min_interparticle_gap(ex.plan, opt_.support_threshold), 0.0));
        }
        const auto& tr = require_certified(exact_truncated(0.5 * *alpha_star_));
        auto e = lower_bound_check("diagonal-avoidance-truncated", refs::kDiagonal, target,
                                   min_interparticle_gap(tr.plan, opt_.support_threshold), 0.0);
        e.note = "minimizer of C_alpha with alpha = alpha*/2";
        out.push_back(std::move(e));
        return out;
    }

    std::vector<CheckEntry> cost_bounds() {
        if (!assumption_A()) return {skipped_check("cost-bound", refs::kCostBound, "small concentration fails")};
        const double n = n_;
        const double bound = n * n * n * (n - 1) * (n - 1) / 4.0 * cost_.raw(*beta_);
        const auto& ex = require_certified(exact());
        const double c = ex.value.value_or(std::numeric_limits<double>::infinity());
        std::vector<CheckEntry> out;
        out.push_back(upper_bound_check("cost-bound", refs::kCostBound, bound, c, 1e-8));
        for (double factor : {1.0 - 1e-6, 0.5}) {
            const double alpha = *alpha_star_ * factor;
            const auto& tr = require_certified(exact_truncated(alpha));
            const double diff = std::abs(c - tr.value.value());
            auto e = upper_bound_check(factor == 0.5 ? "truncation-equality-half" : "truncation-equality",
                                       refs::kTruncation, 1e-8, diff, 0.0);
            std::ostringstream note;
            note.precision(17);
            note << "alpha = " << alpha;
            e.note = note.str();
            out.push_back(std::move(e));
        }
        return out;
    }

    // Primal and dual for c_{alpha*/2}.
    std::vector<CheckEntry> strong_duality() {
        if (!assumption_A()) return {skipped_check("strong-duality", refs::kDuality, "small concentration fails")};
        const double alpha = 0.5 * *alpha_star_;
        const auto ct = cost_.truncated_at(alpha);
        const auto& primal = require_certified(exact_truncated(alpha));
        const PotentialSet dual = solve_dual(rho_, n_, ct, opt_.exact.lp);
        const double v = primal.value.value();
        const double violation = std::max(0.0, max_dual_violation(dual, ct));
        std::vector<CheckEntry> out;
        out.push_back(upper_bound_check("strong-duality", refs::kDuality, 1e-8 * (1.0 + std::abs(v)),
                                        std::abs(v - dual.objective()), 0.0));
        out.push_back(upper_bound_check("dual-feasibility", refs::kDuality, 1e-9, violation, 0.0));
        return out;
    }

    // Canonical potential of c_{alpha*/2} is feasible and optimal for c; it also satisfies complementary
    // slackness against the optimal plan of c.
    std::vector<CheckEntry> potential_transfer() {
        if (!assumption_A()) return {skipped_check("potential-transfer", refs::kTransfer, "small concentration fails")};
        const auto& pot = canonical_potential(0.5 * *alpha_star_);
        const auto& ex = require_certified(exact());
        std::vector<CheckEntry> out;
        out.push_back(upper_bound_check("potential-transfer-feasibility", refs::kTransfer, 1e-9,
                                        std::max(0.0, max_dual_violation(pot, cost_)), 0.0));
        const double v = ex.value.value();
        out.push_back(upper_bound_check("potential-transfer-objective", refs::kTransfer, 1e-8,
                                        std::abs(pot.objective() - v), 0.0));
        const auto cs = check_complementary_slackness(ex.plan, pot, cost_, opt_.support_threshold);
        out.push_back(upper_bound_check("complementary-slackness", refs::kSlackness, 1e-7,
                                        std::max(std::abs(cs.max_residual), std::abs(cs.min_residual)), 0.0));
        auto canon = upper_bound_check("canonical-fixed-point", refs::kTransfer, 1e-9, pot.fixed_point_residual, 0.0);
        canon.diagnostic = true;
        out.push_back(std::move(canon));
        return out;
    }

    std::vector<Point> probe_points(std::uint64_t seed) const {
        const std::size_t d = rho_.dimension();
        Point lo(d, std::numeric_limits<double>::infinity()), hi(d, -std::numeric_limits<double>::infinity());
        for (const auto& a : rho_.atoms())
            for (std::size_t k = 0; k < d; ++k) {
                lo[k] = std::min(lo[k], a.position[k]);
                hi[k] = std::max(hi[k], a.position[k]);
            }
        const double pad = 2.0 * beta_.value_or(0.0);
        Rng rng(seed);
        std::vector<Point> pts(opt_.probes, Point(d));
        for (auto& p : pts)
            for (std::size_t k = 0; k < d; ++k) p[k] = rng.uniform(lo[k] - pad, hi[k] + pad);
        return pts;
    }

    // Uniform bound on the normalized canonical potential (alpha = alpha* (1 - 1e-6)), then Lipschitz and
    // semiconcavity of the canonical potential of c_{alpha*} along random probe pairs.
    PotentialBoundsResult potential_bounds() {
        PotentialBoundsResult res;
        if (!assumption_A()) {
            res.entries.push_back(skipped_check("potential-sup-bound", refs::kSupBound, "small concentration fails"));
            return res;
        }
        const double n = n_;
        const double alpha = *alpha_star_ * (1.0 - 1e-6);
        const auto ct = cost_.truncated_at(alpha);
        const auto& ex = require_certified(exact());
        PotentialSet pot = canonical_potential(alpha);

        // Normalize the tuple at the heaviest support point of the optimal plan.
        const PlanEntry* heaviest = &ex.plan.entries().front();
        for (const auto& e : ex.plan.entries())
            if (e.weight > heaviest->weight) heaviest = &e;
        pot = tuple_from_symmetric(pot, normalizing_shifts(pot, ct, heaviest->indices), ct);

        res.probes = probe_points(opt_.probe_seed);
        res.probe_values = extend_potential(pot, ct, res.probes);
        double sup = 0.0;
        auto account = [&](double v) {
            sup = std::max(sup, std::abs(v));
            for (const auto& ui : *pot.tuple) sup = std::max(sup, std::abs(v + (ui[0] - pot.u[0])));
        };
        for (double v : pot.u) account(v);
        for (double v : res.probe_values) account(v);
        const double bound = n * (n - 1) * (n - 1) * cost_.raw(alpha / 2.0);
        auto sup_entry = upper_bound_check("potential-sup-bound", refs::kSupBound, bound, sup, 1e-6);
        sup_entry.seed = opt_.probe_seed;
        res.entries.push_back(std::move(sup_entry));

        if (cost_.kind() == CostKind::power) {
            auto lip = regularity(*alpha_star_);
            for (auto& e : lip) res.entries.push_back(std::move(e));
        }
        res.potential = std::move(pot);
        return res;
    }

    std::vector<CheckEntry> regularity(double alpha) {
        const auto ct = cost_.truncated_at(alpha);
        const auto& pot = canonical_potential(alpha);
        const double lip_bound = lipschitz_bound(cost_, alpha);
        const double sc_bound = semiconcavity_bound(cost_, alpha);
        const std::size_t d = rho_.dimension();
        const auto base = probe_points(opt_.probe_seed ^ 0x9e3779b97f4a7c15ULL);
        Rng rng(opt_.probe_seed + 1);
        std::vector<Point> pts;
        std::vector<double> hs;
        pts.reserve(3 * base.size());
        for (const auto& x : base) {
            Point dir(d);
            double norm = 0.0;
            for (double& c : dir) {
                c = rng.normal();
                norm += c * c;
            }
            norm = std::sqrt(norm);
            const double h = std::pow(10.0, rng.uniform(-4.0, -1.5));
            Point xp = x, xm = x;
            for (std::size_t k = 0; k < d; ++k) {
                xp[k] += h * dir[k] / norm;
                xm[k] -= h * dir[k] / norm;
            }
            pts.push_back(x);
            pts.push_back(std::move(xp));
            pts.push_back(std::move(xm));
            hs.push_back(h);
        }
        const auto vals = extend_potential(pot, ct, pts);
        double max_slope = 0.0, max_ratio = -std::numeric_limits<double>::infinity();
        bool lip_ok = true, sc_ok = true;
        for (std::size_t i = 0; i < hs.size(); ++i) {
            const double u0 = vals[3 * i], up = vals[3 * i + 1], um = vals[3 * i + 2];
            const double h = hs[i];
            for (double s : {std::abs(up - u0) / h, std::abs(um - u0) / h}) {
                max_slope = std::max(max_slope, s);
                if (s > lip_bound + 1e-6) lip_ok = false;
            }
            const double second = up + um - 2.0 * u0;
            max_ratio = std::max(max_ratio, second / (h * h));
            if (second > 2.0 * sc_bound * h * h + 1e-6) sc_ok = false;
        }
        std::vector<CheckEntry> out;
        auto lip = upper_bound_check("potential-lipschitz", refs::kLipschitz, lip_bound, max_slope, 1e-6);
        lip.status = lip_ok ? CheckStatus::pass : CheckStatus::fail;
        lip.seed = opt_.probe_seed;
        out.push_back(std::move(lip));
        auto sc = upper_bound_check("potential-semiconcavity", refs::kSemiconcave, 2.0 * sc_bound, max_ratio, 0.0);
        sc.status = sc_ok ? CheckStatus::pass : CheckStatus::fail;
        sc.seed = opt_.probe_seed;
        sc.note = "measured: max second difference / |h|^2";
        out.push_back(std::move(sc));
        return out;
    }

    // Separated support points starting from the heaviest support tuple. The cross-coordinate rule is
    // guaranteed under small concentration; the all-coordinates rule is reported as a diagnostic.
    CheckEntry separated_points(SeparationRule rule) {
        const std::string name =
            rule == SeparationRule::all_coordinates ? "separated-points-all-coordinates" : "separated-points";
        if (!assumption_A()) return skipped_check(name, refs::kSeparated, "small concentration fails");
        const auto& ex = require_certified(exact());
        const PlanEntry* heaviest = &ex.plan.entries().front();
        for (const auto& e : ex.plan.entries())
            if (e.weight > heaviest->weight) heaviest = &e;
        CheckEntry e;
        e.name = name;
        e.paper_ref = refs::kSeparated;
        e.claimed = *beta_;
        e.diagnostic = rule == SeparationRule::all_coordinates;
        try {
            const auto pts =
                select_separated_points(ex.plan, heaviest->indices, *beta_, opt_.support_threshold, rule);
            double sep = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < pts.size(); ++i)
                for (std::size_t k = i + 1; k < pts.size(); ++k)
                    for (std::size_t a = 0; a < pts[i].size(); ++a)
                        for (std::size_t b = 0; b < pts[k].size(); ++b) {
                            if (rule == SeparationRule::cross_coordinates && a == b) continue;
                            sep = std::min(sep, distance(rho_.position(pts[i][a]), rho_.position(pts[k][b])));
                        }
            e.measured = sep;
            e.margin = sep - *beta_;
            e.status = sep > *beta_ ? CheckStatus::pass : CheckStatus::fail;
        } catch (const SolverFailure& err) {
            e.status = CheckStatus::fail;
            e.note = err.what();
        }
        return e;
    }

    // Entropic values for the truncated cost c_{alpha*/2}: nonincreasing as eps decreases, above the exact
    // truncated value and within eps N log m of it.
    std::vector<CheckEntry> entropic_sanity(const std::vector<double>& epsilons = {1.0, 0.1, 0.01},
                                            std::size_t max_iters = 200000) {
        if (!assumption_A()) return {skipped_check("entropic", refs::kEntropic, "small concentration fails")};
        const double alpha = 0.5 * *alpha_star_;
        const auto ct = cost_.truncated_at(alpha);
        const auto& ex = require_certified(exact_truncated(alpha));
        const double exact_value = ex.value.value();
        double sup_u = 0.0;
        for (const auto& ui : ex.dual_potentials)
            for (double v : ui) sup_u = std::max(sup_u, std::abs(v));
        std::vector<CheckEntry> out;
        double previous = std::numeric_limits<double>::infinity();
        const double logm = std::log(static_cast<double>(rho_.size()));
        for (double eps : epsilons) {
            const auto r = solve_entropic(rho_, n_, ct, eps, max_iters, opt_.entropic);
            const double v = r.value.value();
            // Weak duality with the exact potentials: <c,P> >= C - sup|u| sum_i ||pi_i P - rho||_1 for
            // any nonnegative P of unit mass, so an inexact marginal can only undercut C by this much.
            double marginal_l1 = 0.0;
            for (int i = 0; i < n_; ++i) {
                const auto w = r.plan.marginal_weights(i);
                for (std::size_t a = 0; a < w.size(); ++a) marginal_l1 += std::abs(w[a] - rho_.weight(a));
            }
            const double floor_slack = sup_u * marginal_l1 + ex.max_dual_violation + 1e-6;
            std::ostringstream tag;
            tag << "entropic-gap-eps=" << eps;
            auto gap = upper_bound_check(tag.str(), refs::kEntropic, eps * n_ * logm, v - exact_value, 1e-6);
            if (v < exact_value - floor_slack) {
                gap.status = CheckStatus::fail;
                gap.note = "below the exact value";
            }
            if (!r.converged) {
                gap.status = CheckStatus::fail;
                gap.note = "not converged";
            }
            gap.diagnostic = true;
            out.push_back(std::move(gap));
            std::ostringstream mono;
            mono << "entropic-monotone-eps=" << eps;
            auto m = upper_bound_check(mono.str(), refs::kEntropic, previous, v, 1e-9);
            if (std::isinf(previous)) m.margin = std::numeric_limits<double>::infinity();
            m.diagnostic = true;
            out.push_back(std::move(m));
            previous = v;
        }
        return out;
    }

    VerificationReport verify_all(bool include_entropic = false) {
        VerificationReport r = report_header();
        auto add = [&](std::vector<CheckEntry> v) {
            for (auto& e : v) r.checks.push_back(std::move(e));
        };
        add(diagonal_avoidance());
        add(cost_bounds());
        add(strong_duality());
        add(potential_transfer());
        add(potential_bounds().entries);
        r.checks.push_back(separated_points(SeparationRule::cross_coordinates));
        r.checks.push_back(separated_points(SeparationRule::all_coordinates));
        if (include_entropic) add(entropic_sanity());
        return r;
    }

private:
    const SolveResult& require_certified(const SolveResult& r) const {
        if (!r.certified) throw SolverFailure("verifier: LP optimum lacks a valid dual certificate");
        return r;
    }

    DiscreteMeasure rho_;
    int n_;
    RepulsiveCost cost_;
    VerifyOptions opt_;
    bool assumption_A_ = false;
    std::optional<double> beta_;
    std::optional<double> alpha_star_;
    std::optional<SolveResult> exact_;
    std::vector<std::pair<double, SolveResult>> truncated_;
    std::vector<std::pair<double, PotentialSet>> potentials_;
};

inline std::vector<CheckEntry> verify_diagonal_avoidance(const DiscreteMeasure& rho, int n, const RepulsiveCost& cost,
                                                         const VerifyOptions& o = {}) {
    return InstanceVerifier(rho, n, cost, o).diagonal_avoidance();
}
inline std::vector<CheckEntry> verify_cost_bounds(const DiscreteMeasure& rho, int n, const RepulsiveCost& cost,
                                                  const VerifyOptions& o = {}) {
    return InstanceVerifier(rho, n, cost, o).cost_bounds();
}
inline std::vector<CheckEntry> verify_potential_bounds(const DiscreteMeasure& rho, int n, const RepulsiveCost& cost,
                                                       const VerifyOptions& o = {}) {
    return InstanceVerifier(rho, n, cost, o).potential_bounds().entries;
}

// ---------------------------------------------------------------------------------------------
// L^p estimate

struct LpEstimate {
    double lp_norm = 0.0;
    double conjugate = 0.0;
    double beta_p = 0.0;  // radius below which mu_rho <= 1/(N(N-1)^2) from Hoelder
    double bound = 0.0;
    double bound_with_slack = 0.0;  // beta_p reduced by one cell diagonal
    double closed_form = 0.0;       // power-law closed form of the same bound
};

inline LpEstimate lp_estimate(const HistogramDensity& density, int n_marginals, const RepulsiveCost& cost, double p) {
    LpEstimate est;
    const double n = n_marginals;
    const double d = static_cast<double>(density.dimension());
    est.lp_norm = histogram_lp_norm(density, p);
    est.conjugate = p / (p - 1.0);
    const double omega = unit_ball_volume(density.dimension());
    const double q = est.conjugate;
    const double denom = omega * std::pow(n * (n - 1) * (n - 1), q) * std::pow(est.lp_norm, q);
    est.beta_p = std::pow(1.0 / denom, 1.0 / d);
    const double factor = n * n * n * (n - 1) * (n - 1) / 4.0;
    est.bound = factor * cost.raw(est.beta_p);
    const double reduced = est.beta_p - density.max_cell_diagonal();
    est.bound_with_slack = reduced > 0.0 ? factor * cost.raw(reduced) : std::numeric_limits<double>::infinity();
    if (cost.kind() == CostKind::power) {
        est.closed_form = factor * std::pow(denom, cost.exponent() / d);
    }
    return est;
}

// Exact cost of the cell-center discretization against the L^p bound (plus discretization slack).
inline std::vector<CheckEntry> verify_lp_estimate(const HistogramDensity& density, int n_marginals,
                                                  const RepulsiveCost& cost, double p, const VerifyOptions& o = {}) {
    HistogramDensity dens = density;
    DiscreteMeasure atoms = dens.discretize();
    if (!check_assumption_A(atoms, n_marginals)) {
        dens = dens.refined();
        atoms = dens.discretize();
        if (!check_assumption_A(atoms, n_marginals)) {
            return {skipped_check("lp-estimate", refs::kLp, "discretization violates small concentration")};
        }
    }
    const LpEstimate est = lp_estimate(dens, n_marginals, cost.untruncated(), p);
    const auto sol = solve_exact(atoms, n_marginals, cost.untruncated(), o.exact);
    const double v = sol.value.value_or(std::numeric_limits<double>::infinity());
    std::vector<CheckEntry> out;
    auto e = upper_bound_check("lp-estimate", refs::kLp, est.bound_with_slack, v, 1e-8);
    std::ostringstream note;
    note.precision(17);
    note << "bound without slack " << est.bound << ", beta_p " << est.beta_p << ", ||rho||_p " << est.lp_norm;
    e.note = note.str();
    out.push_back(std::move(e));
    if (cost.kind() == CostKind::power) {
        auto cf = upper_bound_check("lp-estimate-closed-form", refs::kLp, 1e-12 * std::max(1.0, est.bound),
                                    std::abs(est.closed_form - est.bound), 0.0);
        out.push_back(std::move(cf));
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Dependence on rho

inline CheckEntry verify_lipschitz_in_rho(const DiscreteMeasure& rho1, const DiscreteMeasure& rho2, int n_marginals,
                                          const RepulsiveCost& cost, const VerifyOptions& o = {}) {
    const auto b1 = find_beta(rho1, n_marginals);
    const auto b2 = find_beta(rho2, n_marginals);
    if (!b1 || !b2) return skipped_check("lipschitz-in-rho", refs::kRhoLipschitz, "no common beta");
    const RepulsiveCost c = cost.untruncated();
    const double beta = std::min(*b1, *b2);
    const double alpha = alpha_star(c, n_marginals, beta) * (1.0 - 1e-6);
    const double n = n_marginals;
    const double dist = l1_distance(rho1, rho2);
    const double bound = n * n * (n - 1) * (n - 1) * c.raw(alpha / 2.0) * dist;
    const auto s1 = solve_exact(rho1, n_marginals, c, o.exact);
    const auto s2 = solve_exact(rho2, n_marginals, c, o.exact);
    if (!s1.certified || !s2.certified) throw SolverFailure("lipschitz-in-rho: uncertified optimum");
    const double diff = std::abs(s1.value.value() - s2.value.value());
    auto e = upper_bound_check("lipschitz-in-rho", refs::kRhoLipschitz, bound, diff, 1e-8);
    std::ostringstream note;
    note.precision(17);
    note << "l1 distance " << dist << ", common beta " << beta;
    e.note = note.str();
    return e;
}

// Bounded-Lipschitz distance: sup of int f d(mu - nu) over |f| <= 1, Lip(f) <= 1, computed as the
// transport distance for the metric min(|x - y|, 2).
inline double bounded_lipschitz_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
    if (mu.dimension() != nu.dimension()) throw std::invalid_argument("bounded_lipschitz_distance: dimension mismatch");
    const std::size_t a = mu.size(), b = nu.size();
    std::vector<double> rhs;
    for (std::size_t i = 0; i < a; ++i) rhs.push_back(mu.weight(i));
    for (std::size_t j = 0; j + 1 < b; ++j) rhs.push_back(nu.weight(j));
    lp::Problem problem(rhs);
    for (std::size_t i = 0; i < a; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            const double c = std::min(distance(mu.position(i), nu.position(j)), 2.0);
            if (j + 1 < b) problem.add_column(c, {{static_cast<int>(i), 1.0}, {static_cast<int>(a + j), 1.0}});
            else problem.add_column(c, {{static_cast<int>(i), 1.0}});
        }
    const auto sol = lp::solve(problem);
    if (sol.status != lp::Status::optimal) throw SolverFailure("bounded_lipschitz_distance: LP failed");
    return std::max(0.0, sol.objective);
}

struct ContinuityResult {
    VerificationReport report;
    std::vector<ExtendedReal> values;
    ExtendedReal limit_value;
    std::vector<double> errors;  // |C(rho_n) - C(rho)|, +inf when either side is +inf
    std::vector<double> bl_distances;
    std::optional<std::size_t> equidist_index;  // first k with mu_{rho_n}(delta beta) < thr for all n >= k
};

inline ContinuityResult run_continuity_experiment(const std::vector<DiscreteMeasure>& sequence,
                                                  const DiscreteMeasure& limit, int n_marginals,
                                                  const RepulsiveCost& cost, double tail_tolerance = 1e-3,
                                                  double delta = 0.9, const VerifyOptions& o = {}) {
    const RepulsiveCost c = cost.untruncated();
    ContinuityResult res;
    res.report.instance = instance_hash(limit, n_marginals);
    res.report.n_marginals = n_marginals;
    res.report.cost = describe(c);
    const auto limit_sol = solve_exact(limit, n_marginals, c, o.exact);
    res.limit_value = limit_sol.value;
    for (const auto& r : sequence) {
        const auto s = solve_exact(r, n_marginals, c, o.exact);
        res.values.push_back(s.value);
        res.bl_distances.push_back(bounded_lipschitz_distance(r, limit));
        if (s.value.is_infinite() || res.limit_value.is_infinite()) {
            res.errors.push_back(s.value == res.limit_value ? 0.0 : std::numeric_limits<double>::infinity());
        } else {
            res.errors.push_back(std::abs(s.value.value() - res.limit_value.value()));
        }
    }
    const std::size_t count = sequence.size();
    const std::size_t tail = std::max<std::size_t>(1, count / 3);

    const auto beta = find_beta(limit, n_marginals);
    if (!beta) {
        // Without small concentration the limit theorem makes no claim; record the violation.
        auto e = skipped_check("continuity", refs::kContinuity,
                               "limit measure violates small concentration (largest atom >= 1/(N(N-1)^2)); "
                               "convergence of C(rho_n) is not claimed");
        e.measured = res.errors.empty() ? 0.0 : res.errors.back();
        res.report.checks.push_back(std::move(e));
        return res;
    }
    res.report.beta = beta;
    res.report.alpha_star = alpha_star(c, n_marginals, *beta);

    double worst_tail = 0.0;
    for (std::size_t i = count - tail; i < count; ++i) worst_tail = std::max(worst_tail, res.errors[i]);
    auto e = upper_bound_check("continuity", refs::kContinuity, tail_tolerance, worst_tail, 0.0);
    e.status = worst_tail < tail_tolerance ? CheckStatus::pass : CheckStatus::fail;
    std::ostringstream note;
    note << "max error over the last " << tail << " terms";
    e.note = note.str();
    res.report.checks.push_back(std::move(e));

    const double thr = concentration_threshold(n_marginals);
    std::optional<std::size_t> k;
    for (std::size_t i = count; i-- > 0;) {
        if (concentration(sequence[i], delta * *beta).value < thr) k = i;
        else break;
    }
    res.equidist_index = k;
    CheckEntry eq;
    eq.name = "equidistribution";
    eq.paper_ref = refs::kEquidist;
    eq.claimed = static_cast<double>(count);
    eq.measured = k ? static_cast<double>(*k) : static_cast<double>(count);
    eq.margin = eq.claimed - eq.measured;
    eq.status = k ? CheckStatus::pass : CheckStatus::fail;
    eq.note = "measured: first index past which mu_{rho_n}(0.9 beta) stays below the threshold";
    res.report.checks.push_back(std::move(eq));
    return res;
}

// rho with weights multiplied by (1 + amplitude * xi), xi uniform in [-1, 1], then renormalized.
inline DiscreteMeasure perturb_weights(const DiscreteMeasure& rho, double amplitude, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Atom> atoms = rho.atoms();
    for (auto& a : atoms) a.weight *= 1.0 + amplitude * rng.uniform(-1.0, 1.0);
    return DiscreteMeasure::normalized(rho.dimension(), std::move(atoms));
}

// ---------------------------------------------------------------------------------------------
// Campaigns

inline std::size_t worker_count(std::size_t jobs) {
    std::size_t w = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("MMOT_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) w = static_cast<std::size_t>(v);
    }
    return std::min(w, std::max<std::size_t>(1, jobs));
}

// Runs job(i) for i in [0, count) on a worker pool; results are placed by index.
template <class Result, class Job>
std::vector<Result> parallel_map(std::size_t count, Job&& job) {
    std::vector<Result> out(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                out[i] = job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t w = worker_count(count);
    for (std::size_t t = 1; t < w; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

struct CampaignInstance {
    GeneratorSpec spec;
    DiscreteMeasure measure;
    VerificationReport report;
};

// Verifies every generated instance; reports are sorted by instance hash.
inline std::vector<CampaignInstance> run_campaign(const CampaignSpec& spec, const RepulsiveCost& cost,
                                                  const VerifyOptions& options = {}, bool include_entropic = false) {
    auto results = parallel_map<CampaignInstance>(spec.count, [&](std::size_t i) {
        CampaignInstance ci;
        ci.spec = campaign_instance(spec, i);
        ci.measure = generate_instance(ci.spec);
        VerifyOptions o = options;
        o.probe_seed = derive_seed(options.probe_seed, i);
        ci.report = InstanceVerifier(ci.measure, ci.spec.n_marginals, cost, o).verify_all(include_entropic);
        for (auto& c : ci.report.checks)
            if (c.seed == 0) c.seed = ci.spec.seed;
        return ci;
    });
    std::stable_sort(results.begin(), results.end(), [](const CampaignInstance& a, const CampaignInstance& b) {
        return a.report.instance < b.report.instance;
    });
    return results;
}

}  // namespace mmot
