#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "toporeg/embedding.hpp"

using namespace toporeg;

namespace {

// Nearest point of a dense (alpha, c) sampling of the strip. Used as an
// independent oracle for gamma_inv.
MoebiusCoords brute_force_nearest(const EmbeddedPoint3& p, int n_alpha, int n_c) {
    double best = 1e300;
    MoebiusCoords arg;
    for (int i = 0; i < n_alpha; ++i) {
        const double a = kPi * i / n_alpha;
        for (int k = 0; k <= n_c; ++k) {
            const double c = kDefaultCMin + (kDefaultCMax - kDefaultCMin) * k / n_c;
            const auto g = gamma({a, c});
            const double d = std::hypot(g.x - p.x, g.y - p.y, g.z - p.z);
            if (d < best) {
                best = d;
                arg = {a, c};
            }
        }
    }
    return arg;
}

}  // namespace

TEST(Gamma, ReferenceValues) {
    auto g0 = gamma({0.0, 0.0});
    EXPECT_DOUBLE_EQ(g0.x, 1.0);
    EXPECT_DOUBLE_EQ(g0.y, 0.0);
    EXPECT_DOUBLE_EQ(g0.z, 0.0);

    auto g1 = gamma({kPi / 2, 0.05});
    EXPECT_NEAR(g1.x, -1.05, 1e-15);
    EXPECT_NEAR(g1.y, 0.0, 1e-15);
    EXPECT_NEAR(g1.z, 0.0, 1e-15);

    auto g2 = gamma({kPi / 4, 0.02});
    const double h = std::sqrt(2.0) / 2.0;
    EXPECT_NEAR(g2.x, 0.0, 1e-15);
    EXPECT_NEAR(g2.y, 1.0 + 0.02 * h, 1e-15);
    EXPECT_NEAR(g2.z, 0.02 * h, 1e-15);
    EXPECT_NEAR(g2.y, 1.0141421356, 1e-10);
}

TEST(GammaInv, ReferenceValues) {
    auto m = gamma_inv({1.0, 0.0, -0.03});
    EXPECT_DOUBLE_EQ(m.alpha, 0.0);
    EXPECT_DOUBLE_EQ(m.c, -0.03);

    // cos(alpha) = 0: the printed z / cos(alpha) form has a pole here.
    auto p = gamma_inv({-1.05, 0.0, 0.0});
    EXPECT_NEAR(p.alpha, kPi / 2, 1e-15);
    EXPECT_NEAR(p.c, 0.05, 1e-15);
    auto oracle = brute_force_nearest({-1.05, 0.0, 0.0}, 3600, 200);
    EXPECT_NEAR(oracle.alpha, p.alpha, kPi / 3600);
    EXPECT_NEAR(oracle.c, p.c, 0.1 / 200);
}

TEST(GammaInv, AgreesWithBruteForceOffStrip) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ua(0.0, kPi), uc(-0.05, 0.05), un(-0.01, 0.01);
    for (int n = 0; n < 20; ++n) {
        auto g = gamma({ua(rng), uc(rng)});
        EmbeddedPoint3 q{g.x + un(rng), g.y + un(rng), g.z + un(rng)};
        auto fast = gamma_inv(q);
        auto slow = brute_force_nearest(q, 1800, 100);
        // Both are near-identical points of the strip up to grid resolution
        // and the small off-strip perturbation.
        EXPECT_LT(moebius_distance(fast, slow), 0.03);
    }
}

TEST(GammaInv, DegenerateDirectionIsFlagged) {
    Diagnostics d;
    auto m = gamma_inv({0.0, 0.0, 0.02}, &d);
    EXPECT_EQ(m.alpha, 0.0);
    EXPECT_FALSE(d.empty());
}

TEST(GammaInv, RoundTripGrid) {
    double worst = 0.0;
    for (int i = 0; i < 1801; ++i) {
        // 1801 angles strictly inside [0, pi)
        const double a = kPi * i / 1801.0;
        for (int k = 0; k <= 100; ++k) {
            const double c = kDefaultCMin + (kDefaultCMax - kDefaultCMin) * k / 100.0;
            auto m = gamma_inv(gamma({a, c}));
            worst = std::max({worst, std::abs(m.alpha - a), std::abs(m.c - c)});
        }
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(GammaInv, MatchesPrintedFormulaAwayFromPole) {
    for (int i = 0; i < 1800; ++i) {
        const double a = kPi * i / 1800.0;
        if (std::abs(std::cos(a)) <= 0.1) continue;
        for (double c : {-0.05, -0.01, 0.0, 0.03, 0.05}) {
            auto g = gamma({a, c});
            const double half = 0.5 * wrap_two_pi(std::atan2(g.y, g.x));
            const double printed = g.z / std::cos(half);
            EXPECT_NEAR(gamma_inv(g).c, printed, 1e-12);
        }
    }
}

TEST(Gamma, SeamContinuity) {
    for (double c = -0.05; c <= 0.05 + 1e-12; c += 0.01) {
        for (double delta : {1e-3, 1e-4, 1e-6}) {
            auto a = gamma({kPi - delta, c});
            auto b = gamma({0.0, -c});
            const double d = std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
            EXPECT_LE(d, 3.0 * delta);
        }
    }
}

TEST(GammaG, ReferenceValues) {
    auto e0 = gamma_g({0, 0, 1000, 8, 0, 0, 0});
    EXPECT_EQ(e0.to_array(), (std::array<double, 8>{0, 0, 1000, 8, 0, 0, 0, 0}));

    auto e1 = gamma_g({0, 0, 1000, 8, 5, 0, 0.05});
    auto a = e1.to_array();
    std::array<double, 8> want{0, 0, 1000, 8, 5, 5, 0, 0.25};
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(a[i], want[i], 1e-15);
}

TEST(GammaG, SeamIdentification) {
    LoopParams p{3, -4, 1200, 9, 2.5, kPi - 1e-9, 0.03};
    LoopParams q{3, -4, 1200, 9, 2.5, 0.0, -0.03};
    auto a = gamma_g(p).to_array();
    auto b = gamma_g(q).to_array();
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(a[i], b[i], 1e-8);
}

TEST(GammaGInv, ReferenceValues) {
    auto p0 = gamma_g_inv(EmbeddedPoint8{{0, 0, 1000, 8, 0}, {0, 0, 0}});
    EXPECT_EQ(p0, (LoopParams{0, 0, 1000, 8, 0, 0, 0}));

    auto p1 = gamma_g_inv(EmbeddedPoint8{{0, 0, 1000, 8, 5}, {5, 0, 0.25}});
    EXPECT_NEAR(p1.alpha, 0.0, 1e-15);
    EXPECT_NEAR(p1.c, 0.05, 1e-15);
    EXPECT_EQ(p1.eps, 5.0);
}

TEST(GammaGInv, RoundTripRandom) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double worst = 0.0;
    for (int n = 0; n < 1000; ++n) {
        LoopParams p{-50 + 100 * u01(rng), -50 + 100 * u01(rng), 500 + 4500 * u01(rng),
                     4 + 16 * u01(rng),    kEpsTol + (5 - kEpsTol) * u01(rng),
                     kPi * u01(rng),       -0.05 + 0.1 * u01(rng)};
        auto q = gamma_g_inv(gamma_g(p));
        auto a = p.to_array();
        auto b = q.to_array();
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(GammaGInv, ClampsAndSmallEps) {
    Diagnostics d;
    auto p = gamma_g_inv(EmbeddedPoint8{{1, 2, -10, -1, -0.5}, {0.3, 0.1, 0.0}}, {}, &d);
    EXPECT_GT(p.flux, 0.0);
    EXPECT_GT(p.sigma, 0.0);
    EXPECT_EQ(p.eps, 0.0);
    EXPECT_EQ(p.alpha, 0.0);
    EXPECT_EQ(p.c, 0.0);
    EXPECT_GE(d.warnings.size(), 3u);

    // eps below the tolerance: strip coordinates are discarded.
    auto q = gamma_g_inv(EmbeddedPoint8{{0, 0, 1000, 8, 5e-4}, {1e-4, 3e-4, 0.0}});
    EXPECT_EQ(q.alpha, 0.0);
    EXPECT_EQ(q.c, 0.0);
    EXPECT_EQ(q.eps, 5e-4);
}

TEST(Circle, EmbedAndInvert) {
    auto a = circle_embed({0.0});
    EXPECT_DOUBLE_EQ(a[0], 1.0);
    EXPECT_DOUBLE_EQ(a[1], 0.0);
    auto b = circle_embed({kPi / 2});
    EXPECT_NEAR(b[0], 0.0, 1e-16);
    EXPECT_DOUBLE_EQ(b[1], 1.0);

    EXPECT_DOUBLE_EQ(circle_inv(1.0, 0.0).theta, 0.0);
    EXPECT_DOUBLE_EQ(circle_inv(0.0, -1.0).theta, 3 * kPi / 2);
    EXPECT_NEAR(circle_inv(0.5 * std::cos(1.0), 0.5 * std::sin(1.0)).theta, 1.0, 1e-15);

    Diagnostics d;
    EXPECT_EQ(circle_inv(0.0, 0.0, &d).theta, 0.0);
    EXPECT_FALSE(d.empty());
}

TEST(Circle, RoundTrip) {
    for (int i = 0; i < 10000; ++i) {
        const double t = kTwoPi * i / 10000.0;
        const auto e = circle_embed({t});
        const double back = circle_inv(e[0], e[1]).theta;
        const double diff = std::abs(back - t);
        EXPECT_LT(std::min(diff, kTwoPi - diff), 1e-12);
    }
}

TEST(MoebiusDistance, Properties) {
    EXPECT_EQ(moebius_distance({0.7, 0.01}, {0.7, 0.01}), 0.0);
    EXPECT_LT(moebius_distance({0.0, 0.05}, {kPi - 1e-9, -0.05}), 1e-6);
    EXPECT_NEAR(moebius_distance({0.0, 0.05}, {kPi / 2, 0.05}),
                std::sqrt(2.05 * 2.05 + 0.05 * 0.05), 1e-12);
    EXPECT_NEAR(moebius_distance({0.0, 0.05}, {kPi / 2, 0.05}), 2.05061, 1e-5);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ua(0.0, kPi), uc(-0.05, 0.05);
    for (int n = 0; n < 500; ++n) {
        MoebiusCoords a{ua(rng), uc(rng)}, b{ua(rng), uc(rng)};
        const double d1 = moebius_distance(a, b);
        EXPECT_GE(d1, 0.0);
        EXPECT_DOUBLE_EQ(d1, moebius_distance(b, a));
        EXPECT_GT(d1, 0.0);  // distinct random pairs are not identified
    }
}
