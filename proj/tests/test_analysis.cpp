#include <cmath>
#include <cstdlib>
#include <vector>

#include <gtest/gtest.h>

#include "mmot/analysis.hpp"

using namespace mmot;

namespace {

DiscreteMeasure line(const std::vector<double>& xs, const std::vector<double>& ws) {
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < xs.size(); ++i) atoms.push_back({{xs[i]}, ws[i]});
    return DiscreteMeasure(1, atoms);
}

DiscreteMeasure integers(std::size_t m) {
    std::vector<double> xs, ws(m, 1.0 / static_cast<double>(m));
    for (std::size_t i = 0; i < m; ++i) xs.push_back(static_cast<double>(i));
    return line(xs, ws);
}

const CheckEntry& find(const std::vector<CheckEntry>& v, const std::string& name) {
    for (const auto& e : v)
        if (e.name == name) return e;
    throw std::runtime_error("missing entry " + name);
}

}  // namespace

TEST(InstanceVerifier, BetaAndAlphaStarOnEquispacedAtoms) {
    // Open balls of radius r <= 1.5 hold at most 3 of 8 unit-spaced atoms (mass 3/8 < 1/2).
    InstanceVerifier v(integers(8), 2, RepulsiveCost::power(1.0));
    ASSERT_TRUE(v.assumption_A());
    EXPECT_NEAR(*v.beta(), 1.5, 1e-8);
    // phi^{-1}(2 phi(1.5)) = 0.75
    EXPECT_NEAR(*v.alpha(), 0.75, 1e-8);
}

TEST(DiagonalAvoidance, UniformAtomsPass) {
    const auto entries = verify_diagonal_avoidance(integers(8), 2, RepulsiveCost::power(1.0));
    ASSERT_EQ(entries.size(), 2u);
    for (const auto& e : entries) {
        EXPECT_EQ(e.status, CheckStatus::pass) << e.name;
        EXPECT_GE(e.measured, e.claimed);
    }
}

TEST(DiagonalAvoidance, SkippedWithoutSmallConcentration) {
    const auto rho = line({0.0, 1.0}, {0.5, 0.5});
    const auto entries = verify_diagonal_avoidance(rho, 2, RepulsiveCost::power(1.0));
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0].status, CheckStatus::skipped);
    EXPECT_FALSE(entries[0].note.empty());
}

TEST(CostBounds, HoldOnGeneratedInstances) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        GeneratorSpec g;
        g.seed = seed;
        g.atoms = 8;
        g.dimension = 2;
        const auto rho = generate_instance(g);
        for (double s : {1.0, 2.0}) {
            const auto entries = verify_cost_bounds(rho, 2, RepulsiveCost::power(s));
            ASSERT_EQ(entries.size(), 3u);
            for (const auto& e : entries) EXPECT_EQ(e.status, CheckStatus::pass) << e.name << " " << e.measured;
        }
    }
}

TEST(CostBounds, TruncationFarAboveAlphaStarLowersTheValue) {
    // Capping at alpha = 2 makes the diagonal cost 1/2 cheaper than the off-diagonal cost 1.
    const auto rho = line({0.0, 1.0}, {0.5, 0.5});
    const auto full = solve_exact(rho, 2, RepulsiveCost::power(1.0));
    const auto capped = solve_exact(rho, 2, RepulsiveCost::power(1.0, 2.0));
    EXPECT_NEAR(full.value.value(), 1.0, 1e-12);
    EXPECT_NEAR(capped.value.value(), 0.5, 1e-12);
}

TEST(LpEstimate, UniformOnUnitInterval) {
    const HistogramDensity uniform(1, {{{0.0}, {1.0}, 1.0}});
    const auto est = lp_estimate(uniform, 2, RepulsiveCost::power(1.0), 2.0);
    EXPECT_NEAR(est.lp_norm, 1.0, 1e-14);
    EXPECT_NEAR(est.conjugate, 2.0, 1e-14);
    // omega_1 = 2, (N(N-1)^2)^q = 4, so beta_p = 1/8 and the bound is 2 * phi(1/8) = 16.
    EXPECT_NEAR(est.beta_p, 0.125, 1e-14);
    EXPECT_NEAR(est.bound, 16.0, 1e-12);
    EXPECT_NEAR(est.closed_form, est.bound, 1e-12);
    EXPECT_TRUE(std::isinf(est.bound_with_slack));
}

TEST(LpEstimate, BoundGrowsWithTheNorm) {
    double previous = 0.0;
    for (double h : {1.0, 2.0, 4.0}) {
        const HistogramDensity d(1, {{{0.0}, {1.0 / h}, h}});
        const auto est = lp_estimate(d, 2, RepulsiveCost::power(1.0), 2.0);
        EXPECT_GT(est.bound, previous);
        previous = est.bound;
    }
}

TEST(LpEstimate, VerifiedOnFineHistogram) {
    std::vector<HistogramCell> cells;
    const int k = 16;
    for (int i = 0; i < k; ++i) cells.push_back({{i / 16.0}, {(i + 1) / 16.0}, 1.0});
    const HistogramDensity d(1, cells);
    const auto entries = verify_lp_estimate(d, 2, RepulsiveCost::power(1.0), 2.0);
    ASSERT_EQ(entries.size(), 2u);
    for (const auto& e : entries) EXPECT_EQ(e.status, CheckStatus::pass) << e.name << " " << e.note;
}

TEST(PotentialBounds, SupBoundConstantForTwoMarginals) {
    const auto rho = integers(8);
    const auto cost = RepulsiveCost::power(1.0);
    InstanceVerifier v(rho, 2, cost);
    const auto res = v.potential_bounds();
    const auto& sup = find(res.entries, "potential-sup-bound");
    // N (N-1)^2 phi(alpha/2) = 4 / alpha for N = 2, s = 1.
    EXPECT_NEAR(sup.claimed, 4.0 / (*v.alpha() * (1.0 - 1e-6)), 1e-9);
    EXPECT_EQ(sup.status, CheckStatus::pass);
    EXPECT_EQ(find(res.entries, "potential-lipschitz").status, CheckStatus::pass);
    EXPECT_EQ(find(res.entries, "potential-semiconcavity").status, CheckStatus::pass);
    EXPECT_EQ(res.probes.size(), res.probe_values.size());
}

TEST(VerifyAll, GeneratedInstancesPassEveryCheckedEntry) {
    for (std::uint64_t seed = 10; seed < 14; ++seed) {
        GeneratorSpec g;
        g.seed = seed;
        g.n_marginals = seed % 2 == 0 ? 2 : 3;
        g.atoms = g.n_marginals == 2 ? 9 : 13;
        const auto rho = generate_instance(g);
        const auto r = InstanceVerifier(rho, g.n_marginals, RepulsiveCost::power(1.0)).verify_all();
        EXPECT_TRUE(r.all_pass()) << r.instance;
        EXPECT_NE(r.find("strong-duality"), nullptr);
        EXPECT_NE(r.find("separated-points"), nullptr);
        EXPECT_TRUE(r.find("separated-points-all-coordinates")->diagnostic);
    }
}

TEST(LipschitzInRho, IdenticalMeasuresGiveZero) {
    const auto rho = integers(8);
    const auto e = verify_lipschitz_in_rho(rho, rho, 2, RepulsiveCost::power(1.0));
    EXPECT_EQ(e.status, CheckStatus::pass);
    EXPECT_DOUBLE_EQ(e.measured, 0.0);
    EXPECT_DOUBLE_EQ(e.claimed, 0.0);
}

TEST(LipschitzInRho, PerturbedPairsRespectBound) {
    const auto rho = integers(8);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto e = verify_lipschitz_in_rho(rho, perturb_weights(rho, 0.1, seed), 2, RepulsiveCost::power(2.0));
        EXPECT_EQ(e.status, CheckStatus::pass) << e.measured << " " << e.claimed;
        EXPECT_GT(e.claimed, 0.0);
    }
}

TEST(BoundedLipschitz, DiracDistances) {
    const auto a = line({0.0}, {1.0});
    EXPECT_NEAR(bounded_lipschitz_distance(a, line({0.5}, {1.0})), 0.5, 1e-12);
    EXPECT_NEAR(bounded_lipschitz_distance(a, line({7.0}, {1.0})), 2.0, 1e-12);
    EXPECT_NEAR(bounded_lipschitz_distance(a, a), 0.0, 1e-12);
    // Half the mass moves by 1.
    EXPECT_NEAR(bounded_lipschitz_distance(line({0.0, 1.0}, {0.5, 0.5}), line({1.0}, {1.0})), 0.5, 1e-12);
}

TEST(Continuity, ConstantSequenceConverges) {
    const auto rho = integers(8);
    const std::vector<DiscreteMeasure> seq(6, rho);
    const auto res = run_continuity_experiment(seq, rho, 2, RepulsiveCost::power(1.0));
    for (double e : res.errors) EXPECT_NEAR(e, 0.0, 1e-12);
    const auto* c = res.report.find("continuity");
    ASSERT_NE(c, nullptr);
    EXPECT_EQ(c->status, CheckStatus::pass);
    ASSERT_TRUE(res.equidist_index.has_value());
    EXPECT_EQ(*res.equidist_index, 0u);
}

TEST(Continuity, PerturbationsConverge) {
    const auto rho = integers(8);
    std::vector<DiscreteMeasure> seq;
    for (int k = 0; k < 9; ++k) seq.push_back(perturb_weights(rho, 0.5 * std::pow(0.25, k), derive_seed(3, k)));
    const auto res = run_continuity_experiment(seq, rho, 2, RepulsiveCost::power(1.0));
    EXPECT_EQ(res.report.find("continuity")->status, CheckStatus::pass);
    EXPECT_EQ(res.report.find("equidistribution")->status, CheckStatus::pass);
    EXPECT_LT(res.bl_distances.back(), res.bl_distances.front());
}

TEST(Continuity, TwoDiracLimitIsFlagged) {
    std::vector<DiscreteMeasure> seq;
    for (int n = 3; n < 10; ++n) seq.push_back(line({0.0, 1.0}, {0.5 + 1.0 / n, 0.5 - 1.0 / n}));
    const auto limit = line({0.0, 1.0}, {0.5, 0.5});
    const auto res = run_continuity_experiment(seq, limit, 2, RepulsiveCost::power(1.0));
    ASSERT_EQ(res.report.checks.size(), 1u);
    EXPECT_EQ(res.report.checks[0].status, CheckStatus::skipped);
    EXPECT_NEAR(res.limit_value.value(), 1.0, 1e-12);
    for (const auto& v : res.values) EXPECT_TRUE(v.is_infinite());
}

TEST(InstanceHash, StableAndSensitive) {
    const auto rho = integers(5);
    EXPECT_EQ(instance_hash(rho, 2), instance_hash(integers(5), 2));
    EXPECT_EQ(instance_hash(rho, 2).size(), 16u);
    EXPECT_NE(instance_hash(rho, 2), instance_hash(rho, 3));
    EXPECT_NE(instance_hash(rho, 2), instance_hash(perturb_weights(rho, 1e-9, 1), 2));
}

TEST(Generator, SatisfiesSmallConcentration) {
    CampaignSpec c;
    c.seed = 99;
    for (std::size_t i = 0; i < 40; ++i) {
        const auto g = campaign_instance(c, i);
        const auto rho = generate_instance(g);
        EXPECT_EQ(rho.size(), g.atoms);
        EXPECT_TRUE(check_assumption_A(rho, g.n_marginals));
        const auto [lo, hi] = atom_range(g.n_marginals);
        EXPECT_GE(g.atoms, lo);
        EXPECT_LE(g.atoms, hi);
    }
    GeneratorSpec bad;
    bad.n_marginals = 3;
    bad.atoms = 12;
    EXPECT_THROW(generate_instance(bad), std::invalid_argument);
}

TEST(Campaign, DeterministicAcrossRunsAndWorkerCounts) {
    CampaignSpec c;
    c.seed = 5;
    c.count = 6;
    setenv("MMOT_WORKERS", "1", 1);
    EXPECT_EQ(worker_count(100), 1u);
    const auto a = run_campaign(c, RepulsiveCost::power(1.0));
    setenv("MMOT_WORKERS", "4", 1);
    EXPECT_EQ(worker_count(100), 4u);
    EXPECT_EQ(worker_count(2), 2u);
    const auto b = run_campaign(c, RepulsiveCost::power(1.0));
    unsetenv("MMOT_WORKERS");
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].report.instance, b[i].report.instance);
        ASSERT_EQ(a[i].report.checks.size(), b[i].report.checks.size());
        for (std::size_t k = 0; k < a[i].report.checks.size(); ++k) {
            EXPECT_EQ(a[i].report.checks[k].measured, b[i].report.checks[k].measured);
            EXPECT_EQ(a[i].report.checks[k].status, b[i].report.checks[k].status);
        }
        if (i > 0) EXPECT_LT(a[i - 1].report.instance, a[i].report.instance);
    }
}

TEST(ParallelMap, PropagatesExceptions) {
    EXPECT_THROW(parallel_map<int>(8, [](std::size_t i) -> int {
                     if (i == 5) throw std::runtime_error("boom");
                     return static_cast<int>(i);
                 }),
                 std::runtime_error);
    const auto v = parallel_map<int>(10, [](std::size_t i) { return static_cast<int>(i * i); });
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
}
