#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mmot/costs.hpp"
#include "mmot/random.hpp"

using namespace mmot;

TEST(Phi, Values) {
    const auto coulomb = RepulsiveCost::power(1.0);
    const auto s2 = RepulsiveCost::power(2.0);
    EXPECT_DOUBLE_EQ(phi(coulomb, 2.0).value(), 0.5);
    EXPECT_DOUBLE_EQ(phi(s2, 0.5).value(), 4.0);
    EXPECT_TRUE(phi(coulomb, 0.0).is_infinite());
    EXPECT_THROW(phi(coulomb, -1.0), std::domain_error);
    EXPECT_GT(coulomb(1e-12), 1e6);
    EXPECT_GT(s2(1e-12), 1e6);
}

TEST(Phi, TruncatedAtZeroIsCap) {
    const auto c = RepulsiveCost::power(1.0, 0.5);
    EXPECT_DOUBLE_EQ(phi(c, 0.0).value(), 2.0);
    EXPECT_DOUBLE_EQ(phi(c, 0.1).value(), 2.0);
    EXPECT_DOUBLE_EQ(phi(c, 4.0).value(), 0.25);
}

TEST(PhiInverse, Values) {
    EXPECT_DOUBLE_EQ(phi_inverse(RepulsiveCost::power(1.0), 2.0), 0.5);
    EXPECT_DOUBLE_EQ(phi_inverse(RepulsiveCost::power(2.0), 4.0), 0.5);
    EXPECT_THROW(phi_inverse(RepulsiveCost::power(1.0), 0.0), std::domain_error);
    EXPECT_THROW(phi_inverse(RepulsiveCost::power(1.0), -3.0), std::domain_error);
}

TEST(PhiInverse, InvertsPhiOnRandomPoints) {
    Rng rng(21);
    for (double s : {0.5, 1.0, 2.0, 3.0}) {
        const auto c = RepulsiveCost::power(s);
        for (int i = 0; i < 200; ++i) {
            const double t = rng.uniform(1e-3, 10.0);
            EXPECT_NEAR(phi_inverse(c, c.raw(t)), t, 1e-12 * std::max(1.0, t));
            const double v = rng.uniform(0.01, 100.0);
            EXPECT_NEAR(c.raw(phi_inverse(c, v)), v, 1e-12 * v);
        }
    }
}

TEST(AlphaStar, Values) {
    EXPECT_NEAR(alpha_star(RepulsiveCost::power(1.0), 2, 1.0), 0.5, 1e-15);
    EXPECT_NEAR(alpha_star(RepulsiveCost::power(1.0), 3, 1.0), 1.0 / 9.0, 1e-15);
    // Hand arithmetic: phi(2) = 1/4, times 2 is 1/2, and t^-2 = 1/2 at t = sqrt(2).
    EXPECT_NEAR(alpha_star(RepulsiveCost::power(2.0), 2, 2.0), std::sqrt(2.0), 1e-14);
    EXPECT_DOUBLE_EQ(separation_multiplier(2), 2.0);
    EXPECT_DOUBLE_EQ(separation_multiplier(3), 9.0);
    EXPECT_DOUBLE_EQ(separation_multiplier(4), 24.0);
}

TEST(AlphaStar, StrictlyBelowBeta) {
    Rng rng(22);
    for (int i = 0; i < 500; ++i) {
        const auto c = RepulsiveCost::power(rng.uniform(0.2, 4.0));
        const int n = 2 + static_cast<int>(rng.index(4));
        const double beta = rng.uniform(1e-3, 50.0);
        EXPECT_LT(alpha_star(c, n, beta), beta);
    }
}

TEST(PairwiseCost, Examples) {
    const auto coulomb = RepulsiveCost::power(1.0);
    const std::vector<Point> two{{0.0}, {1.0}};
    EXPECT_DOUBLE_EQ(pairwise_cost(coulomb, two, false).value(), 1.0);
    const std::vector<Point> three{{0.0}, {1.0}, {2.0}};
    EXPECT_DOUBLE_EQ(pairwise_cost(coulomb, three, false).value(), 2.5);
    const auto trunc = RepulsiveCost::power(1.0, 0.5);
    const std::vector<Point> close{{0.0}, {0.1}};
    EXPECT_DOUBLE_EQ(pairwise_cost(trunc, close, true).value(), 2.0);
    EXPECT_NEAR(pairwise_cost(trunc, close, false).value(), 10.0, 1e-12);
    const std::vector<Point> same{{0.3}, {0.3}};
    EXPECT_TRUE(pairwise_cost(coulomb, same, false).is_infinite());
    EXPECT_THROW(pairwise_cost(coulomb, two, true), std::invalid_argument);
    const std::vector<Point> mixed{{0.0}, {1.0, 2.0}};
    EXPECT_THROW(pairwise_cost(coulomb, mixed, false), std::invalid_argument);
}

TEST(PairwiseCost, TruncationProperties) {
    Rng rng(23);
    for (int i = 0; i < 300; ++i) {
        const int n = 2 + static_cast<int>(rng.index(3));
        const double alpha = rng.uniform(0.05, 0.5);
        const auto c = RepulsiveCost::power(rng.uniform(0.5, 3.0), alpha);
        std::vector<Point> x;
        double min_gap = 1e300;
        for (int k = 0; k < n; ++k) x.push_back({rng.uniform(), rng.uniform()});
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b) min_gap = std::min(min_gap, distance(x[a], x[b]));
        const double tr = pairwise_cost(c, x, true).value();
        const double raw = pairwise_cost(c, x, false).value();
        EXPECT_LE(tr, raw * (1 + 1e-15));
        EXPECT_LE(tr, n * (n - 1) / 2.0 * c.cap() * (1 + 1e-15));
        if (min_gap >= alpha) EXPECT_DOUBLE_EQ(tr, raw);
    }
}

TEST(DerivativeBounds, Lipschitz) {
    EXPECT_DOUBLE_EQ(lipschitz_bound(RepulsiveCost::power(1.0), 1.0), 1.0);
    EXPECT_DOUBLE_EQ(lipschitz_bound(RepulsiveCost::power(1.0), 0.5), 4.0);
    EXPECT_DOUBLE_EQ(lipschitz_bound(RepulsiveCost::power(2.0), 1.0), 2.0);
}

TEST(DerivativeBounds, Semiconcavity) {
    EXPECT_DOUBLE_EQ(semiconcavity_bound(RepulsiveCost::power(1.0), 1.0), 3.0);
    EXPECT_DOUBLE_EQ(semiconcavity_bound(RepulsiveCost::power(1.0), 2.0), 3.0 / 8.0);
    EXPECT_DOUBLE_EQ(semiconcavity_bound(RepulsiveCost::power(2.0), 1.0), 8.0);
}

TEST(DerivativeBounds, AgreeWithFiniteDifferenceSupremum) {
    // sup_{s > t} |phi'(s)| and sup_{s > t} phi''(s) - phi'(s)/s from central differences on a grid.
    for (double e : {0.5, 1.0, 2.0}) {
        const auto c = RepulsiveCost::power(e);
        for (double t : {0.3, 1.0, 2.5}) {
            double lip = 0.0, sc = -1e300;
            for (double s = t * (1 + 1e-6); s < 50 * t; s *= 1.01) {
                const double h = 1e-4 * s;
                const double d1 = (c.raw(s + h) - c.raw(s - h)) / (2 * h);
                const double d2 = (c.raw(s + h) - 2 * c.raw(s) + c.raw(s - h)) / (h * h);
                lip = std::max(lip, std::abs(d1));
                sc = std::max(sc, d2 - d1 / s);
            }
            EXPECT_NEAR(lip, lipschitz_bound(c, t), 1e-5 * lipschitz_bound(c, t));
            EXPECT_NEAR(sc, semiconcavity_bound(c, t), 1e-4 * semiconcavity_bound(c, t));
        }
    }
}

TEST(DerivativeBounds, TableCostsRejected) {
    const auto c = RepulsiveCost::table({{0.5, 2.0}, {1.0, 1.0}, {2.0, 0.5}});
    EXPECT_THROW(lipschitz_bound(c, 1.0), std::invalid_argument);
    EXPECT_THROW(semiconcavity_bound(c, 1.0), std::invalid_argument);
}

TEST(TableCost, InterpolatesMonotonically) {
    // Tabulated Coulomb profile.
    std::vector<std::pair<double, double>> pts;
    for (double t = 0.25; t <= 4.0; t *= 1.5) pts.emplace_back(t, 1.0 / t);
    const auto c = RepulsiveCost::table(pts);
    double prev = 1e300;
    for (double t = 0.01; t < 20.0; t *= 1.03) {
        const double v = c.raw(t);
        EXPECT_LT(v, prev);
        EXPECT_GT(v, 0.0);
        prev = v;
    }
    for (const auto& [t, v] : pts) EXPECT_NEAR(c.raw(t), v, 1e-14);
    EXPECT_NEAR(c.raw(1.3), 1.0 / 1.3, 2e-3);
    EXPECT_GT(c.raw(1e-12), 1e6);
    for (double v : {0.1, 0.7, 3.0, 50.0}) EXPECT_NEAR(c.raw(phi_inverse(c, v)), v, 1e-9 * v);
}

TEST(TableCost, RejectsNonMonotoneTables) {
    EXPECT_THROW(RepulsiveCost::table({{1.0, 1.0}}), std::invalid_argument);
    EXPECT_THROW(RepulsiveCost::table({{1.0, 1.0}, {2.0, 1.5}}), std::invalid_argument);
    EXPECT_THROW(RepulsiveCost::table({{2.0, 1.0}, {1.0, 0.5}}), std::invalid_argument);
    EXPECT_THROW(RepulsiveCost::table({{0.0, 1.0}, {1.0, 0.5}}), std::invalid_argument);
}

TEST(Truncation, CapAndAccessors) {
    const auto c = RepulsiveCost::power(2.0).truncated_at(0.5);
    EXPECT_TRUE(c.is_truncated());
    EXPECT_DOUBLE_EQ(c.cap(), 4.0);
    EXPECT_DOUBLE_EQ(c(0.1), 4.0);
    EXPECT_DOUBLE_EQ(c(1.0), 1.0);
    EXPECT_FALSE(c.untruncated().is_truncated());
    EXPECT_THROW(RepulsiveCost::power(1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(RepulsiveCost::power(-1.0), std::invalid_argument);
}
