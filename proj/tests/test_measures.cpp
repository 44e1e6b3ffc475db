#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mmot/measures.hpp"
#include "mmot/random.hpp"

using namespace mmot;

namespace {

DiscreteMeasure line(const std::vector<double>& xs, const std::vector<double>& ws) {
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < xs.size(); ++i) atoms.push_back({{xs[i]}, ws[i]});
    return DiscreteMeasure(1, atoms);
}

DiscreteMeasure uniform_line(std::size_t m) {
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < m; ++i) atoms.push_back({{static_cast<double>(i)}, 1.0 / static_cast<double>(m)});
    return DiscreteMeasure(1, atoms);
}

// Open-ball mass maximized over a uniform grid of centers.
double grid_concentration(const DiscreteMeasure& rho, double r, double lo, double hi, double step) {
    double best = 0.0;
    for (double x = lo; x <= hi; x += step) {
        double s = 0.0;
        for (const auto& a : rho.atoms())
            if (std::abs(a.position[0] - x) < r) s += a.weight;
        best = std::max(best, s);
    }
    return best;
}

// Quadratic scan over contiguous runs of sorted atoms that fit strictly inside a window of length 2r.
double pairwise_concentration_1d(const DiscreteMeasure& rho, double r) {
    std::vector<std::pair<double, double>> a;
    for (const auto& at : rho.atoms()) a.emplace_back(at.position[0], at.weight);
    std::sort(a.begin(), a.end());
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = i; j < a.size() && a[j].first - a[i].first < 2 * r; ++j) {
            s += a[j].second;
            best = std::max(best, s);
        }
    }
    return best;
}

DiscreteMeasure random_measure(Rng& rng, std::size_t d, std::size_t m) {
    std::vector<Atom> atoms;
    for (std::size_t i = 0; i < m; ++i) {
        Point p(d);
        for (double& c : p) c = rng.uniform();
        atoms.push_back({p, 0.05 + rng.uniform()});
    }
    return DiscreteMeasure::normalized(d, atoms);
}

}  // namespace

TEST(DiscreteMeasure, RejectsBadWeights) {
    EXPECT_THROW(line({0, 1}, {0.5, 0.4}), std::invalid_argument);
    EXPECT_THROW(line({0, 1}, {1.2, -0.2}), std::invalid_argument);
    EXPECT_THROW(DiscreteMeasure(2, {{{0.0}, 1.0}}), std::invalid_argument);
}

TEST(DiscreteMeasure, MergesNearDuplicates) {
    const auto rho = line({0.0, 1e-14, 1.0}, {0.25, 0.25, 0.5});
    ASSERT_EQ(rho.size(), 2u);
    EXPECT_DOUBLE_EQ(rho.max_weight(), 0.5);
    EXPECT_NEAR(rho.weight(0) + rho.weight(1), 1.0, 1e-15);
}

TEST(Concentration, EqualSeparatedAtomsGiveOneOverM) {
    const auto rho = uniform_line(5);
    for (double r : {0.1, 0.3, 0.49}) EXPECT_DOUBLE_EQ(concentration(rho, r).value, 0.2);
}

TEST(Concentration, TwoDiracs) {
    const auto rho = line({0, 1}, {0.5, 0.5});
    const auto c = concentration(rho, 0.4);
    EXPECT_DOUBLE_EQ(c.value, 0.5);
    EXPECT_EQ(c.exactness, Exactness::exact);
}

TEST(Concentration, WindowExampleAgainstGridOracle) {
    const auto rho = line({0, 0.1, 0.2, 0.9}, {0.3, 0.2, 0.2, 0.3});
    const double oracle = grid_concentration(rho, 0.15, -0.5, 1.5, 1e-4);
    EXPECT_NEAR(oracle, 0.7, 1e-12);
    EXPECT_NEAR(concentration(rho, 0.15).value, 0.7, 1e-12);
}

TEST(Concentration, OpenBallsUseStrictWindow) {
    const auto rho = uniform_line(3);
    // Window of length exactly 2 cannot hold two atoms at distance 2 strictly inside.
    EXPECT_DOUBLE_EQ(concentration(rho, 0.5).value, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(concentration(rho, 0.5 + 1e-9).value, 2.0 / 3.0);
}

TEST(Concentration, RejectsNonpositiveRadius) {
    const auto rho = uniform_line(3);
    EXPECT_THROW(concentration(rho, 0.0), std::domain_error);
    EXPECT_THROW(concentration(rho, -1.0), std::domain_error);
}

TEST(Concentration, OneDimensionalMatchesQuadraticScan) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto rho = random_measure(rng, 1, 3 + rng.index(10));
        const double r = rng.uniform(0.01, 0.6);
        EXPECT_NEAR(concentration(rho, r).value, pairwise_concentration_1d(rho, r), 1e-12);
    }
}

TEST(Concentration, TwoDimensionalDominatesGridAndAtomBalls) {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const auto rho = random_measure(rng, 2, 4 + rng.index(6));
        const double r = rng.uniform(0.05, 0.5);
        const auto c = concentration(rho, r);
        ASSERT_EQ(c.exactness, Exactness::exact);
        double grid = 0.0;
        for (double x = -0.5; x <= 1.5; x += 0.01)
            for (double y = -0.5; y <= 1.5; y += 0.01) {
                double s = 0.0;
                for (const auto& a : rho.atoms())
                    if (distance(a.position, {x, y}) < r) s += a.weight;
                grid = std::max(grid, s);
            }
        EXPECT_GE(c.value + 1e-12, grid);
        // The reported maximum is attained by some ball: slightly enlarged balls on a fine grid reach it.
        double enlarged = 0.0;
        for (double x = -0.5; x <= 1.5; x += 0.005)
            for (double y = -0.5; y <= 1.5; y += 0.005) {
                double s = 0.0;
                for (const auto& a : rho.atoms())
                    if (distance(a.position, {x, y}) < r + 0.005) s += a.weight;
                enlarged = std::max(enlarged, s);
            }
        EXPECT_LE(c.value, enlarged + 1e-12);
    }
}

TEST(ConcentrationProfile, MonotoneAndAboveLargestAtom) {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        const auto rho = random_measure(rng, 1 + trial % 2, 8);
        std::vector<double> radii;
        for (int k = 1; k <= 30; ++k) radii.push_back(0.02 * k);
        const auto prof = concentration_profile(rho, radii);
        for (std::size_t i = 0; i < radii.size(); ++i) {
            EXPECT_LE(prof.values[i], 1.0);
            EXPECT_GE(prof.values[i], rho.max_weight());
            if (i > 0) EXPECT_GE(prof.values[i], prof.values[i - 1]);
        }
    }
}

TEST(FindBeta, TwoDiracsHasNone) { EXPECT_FALSE(find_beta(line({0, 1}, {0.5, 0.5}), 2).has_value()); }

TEST(FindBeta, HeavyAtomHasNone) { EXPECT_FALSE(find_beta(line({0, 1, 2}, {0.6, 0.2, 0.2}), 2).has_value()); }

TEST(FindBeta, EightUniformAtomsAgainstRadiusGridOracle) {
    const auto rho = uniform_line(8);
    // Largest grid radius with mu < 1/2 using the independent quadratic scan.
    double oracle = 0.0;
    for (double r = 1e-4; r < 4.0; r += 1e-4)
        if (pairwise_concentration_1d(rho, r) < 0.5) oracle = r;
    EXPECT_NEAR(oracle, 1.5, 2e-4);
    const auto beta = find_beta(rho, 2);
    ASSERT_TRUE(beta.has_value());
    EXPECT_NEAR(*beta, 1.5, 1e-8);
}

TEST(FindBeta, ReturnedRadiusSatisfiesStrictInequality) {
    Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 2;
        const auto rho = random_measure(rng, 1 + trial % 2, n == 2 ? 8 : 16);
        const auto beta = find_beta(rho, n);
        if (!beta) {
            EXPECT_FALSE(check_assumption_A(rho, n));
            continue;
        }
        EXPECT_LT(concentration(rho, *beta * (1 - 1e-6)).value, concentration_threshold(n));
    }
}

TEST(AssumptionA, Examples) {
    std::vector<Atom> atoms;
    for (int i = 0; i < 10; ++i) atoms.push_back({{static_cast<double>(i)}, 0.1});
    const DiscreteMeasure rho(1, atoms);
    EXPECT_TRUE(check_assumption_A(rho, 2));
    EXPECT_FALSE(check_assumption_A(rho, 3));
    EXPECT_NEAR(concentration_threshold(3), 1.0 / 12.0, 1e-15);
    EXPECT_FALSE(check_assumption_A(line({0, 1}, {0.5, 0.5}), 2));
}

TEST(L1Distance, Examples) {
    const auto a = line({0, 1}, {0.5, 0.5});
    EXPECT_DOUBLE_EQ(l1_distance(a, a), 0.0);
    const double t = 0.125;
    EXPECT_NEAR(l1_distance(a, line({0, 1}, {0.5 + t, 0.5 - t})), 2 * t, 1e-15);
    EXPECT_NEAR(l1_distance(a, line({2, 3}, {0.5, 0.5})), 2.0, 1e-15);
    EXPECT_THROW(l1_distance(a, DiscreteMeasure(2, {{{0.0, 0.0}, 1.0}})), std::invalid_argument);
}

TEST(L1Distance, MetricAxiomsOnRandomTriples) {
    Rng rng(15);
    auto draw = [&] {
        std::vector<Atom> atoms;
        for (int i = 0; i < 6; ++i)
            if (rng.uniform() < 0.7) atoms.push_back({{static_cast<double>(i)}, 0.1 + rng.uniform()});
        if (atoms.empty()) atoms.push_back({{0.0}, 1.0});
        return DiscreteMeasure::normalized(1, atoms);
    };
    for (int trial = 0; trial < 200; ++trial) {
        const auto x = draw(), y = draw(), z = draw();
        EXPECT_NEAR(l1_distance(x, y), l1_distance(y, x), 1e-15);
        EXPECT_LE(l1_distance(x, z), l1_distance(x, y) + l1_distance(y, z) + 1e-15);
        EXPECT_EQ(l1_distance(x, x), 0.0);
        if (l1_distance(x, y) == 0.0) {
            ASSERT_EQ(x.size(), y.size());
            for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x.weight(i), y.weight(i));
        }
    }
}

TEST(Histogram, LpNormExamples) {
    const HistogramDensity uniform(1, {{{0.0}, {1.0}, 1.0}});
    for (double p : {1.5, 2.0, 7.0}) EXPECT_NEAR(histogram_lp_norm(uniform, p), 1.0, 1e-14);
    const HistogramDensity two(1, {{{0.0}, {0.25}, 2.0}, {{0.5}, {0.75}, 2.0}});
    EXPECT_NEAR(histogram_lp_norm(two, 2.0), std::sqrt(2.0), 1e-14);
    const HistogramDensity half(1, {{{0.0}, {0.5}, 2.0}});
    EXPECT_NEAR(histogram_lp_norm(half, 3.0), std::cbrt(4.0), 1e-14);
    EXPECT_THROW(histogram_lp_norm(half, 1.0), std::domain_error);
    EXPECT_THROW(HistogramDensity(1, {{{0.0}, {1.0}, 2.0}}), std::invalid_argument);
}

TEST(Histogram, DiscretizeAndRefine) {
    const HistogramDensity sq(2, {{{0.0, 0.0}, {1.0, 1.0}, 1.0}});
    const auto atoms = sq.discretize();
    ASSERT_EQ(atoms.size(), 1u);
    EXPECT_EQ(atoms.position(0), (Point{0.5, 0.5}));
    const auto fine = sq.refined();
    EXPECT_EQ(fine.cells().size(), 4u);
    EXPECT_NEAR(fine.max_cell_diagonal(), std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(histogram_lp_norm(fine, 2.0), 1.0, 1e-14);
}

TEST(Histogram, HoelderChainOnDiscretization) {
    // Atoms inside an open ball of radius r come from cells inside the ball of radius r + diag/2.
    Rng rng(16);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t d = 1 + trial % 2;
        const int k = 6;
        std::vector<HistogramCell> cells;
        std::vector<double> vals;
        double mass = 0.0;
        const double h = 1.0 / k;
        const std::size_t count = d == 1 ? k : k * k;
        for (std::size_t c = 0; c < count; ++c) {
            const double v = 0.2 + rng.uniform();
            vals.push_back(v);
            mass += v * std::pow(h, static_cast<double>(d));
        }
        for (std::size_t c = 0; c < count; ++c) {
            Point lo(d), hi(d);
            lo[0] = static_cast<double>(c % k) * h;
            if (d == 2) lo[1] = static_cast<double>(c / k) * h;
            for (std::size_t q = 0; q < d; ++q) hi[q] = lo[q] + h;
            cells.push_back({lo, hi, vals[c] / mass});
        }
        const HistogramDensity dens(d, cells);
        const auto atoms = dens.discretize();
        for (double p : {1.5, 2.0, 4.0}) {
            const double q = p / (p - 1);
            for (double r : {0.05, 0.2, 0.4}) {
                const double slack = 0.5 * dens.max_cell_diagonal();
                const double bound = histogram_lp_norm(dens, p) *
                                     std::pow(unit_ball_volume(d) * std::pow(r + slack, static_cast<double>(d)), 1.0 / q);
                EXPECT_LE(concentration(atoms, r).value, bound + 1e-12);
            }
        }
    }
}

TEST(UnitBall, Volumes) {
    EXPECT_NEAR(unit_ball_volume(1), 2.0, 1e-15);
    EXPECT_NEAR(unit_ball_volume(2), M_PI, 1e-14);
    EXPECT_NEAR(unit_ball_volume(3), 4.0 * M_PI / 3.0, 1e-14);
}
