#include <gtest/gtest.h>

#include <cmath>

#include "jsq/mgf.hpp"
#include "oracles.hpp"

using namespace jsq;

namespace {

QueueParams homog() { return QueueParams::normalize(0.4, {0.3, 0.3}); }
QueueParams hetero() { return QueueParams::normalize(0.4, {0.25, 0.20, 0.15}); }

} // namespace

TEST(Gamma, OneAtOrigin) {
    for (auto p : {homog(), hetero()}) {
        ThetaPoint zero(static_cast<std::size_t>(p.k() + 1), 0.0);
        for (auto U : all_faces(p.k())) {
            EXPECT_NEAR(gamma_plus(p, U, zero), 1.0, 1e-15);
            EXPECT_NEAR(gamma_zero(p, U, zero), 1.0, 1e-15);
        }
    }
}

TEST(Gamma, HandValues) {
    auto p = homog();
    ThetaPoint th{0.2, 0.0, 0.1};
    EXPECT_NEAR(gamma_plus(p, 0b01, th), 0.4 * std::exp(0.1) + 0.3 * std::exp(-0.1) + 0.3 * std::exp(-0.1), 1e-15);
    for (double t0 : {-3.0, 0.0, 0.7})
        EXPECT_NEAR(gamma_zero(p, 0b11, ThetaPoint{t0, 0.25, 0.25}), 0.4 * std::exp(0.25) + 0.6, 1e-15);
}

TEST(Gamma, ZeroFaceTieIgnoresLevelExponent) {
    auto p = hetero();
    for (auto U : all_faces(3)) {
        if (std::popcount(U) < 2) continue;
        double a = gamma_zero(p, U, ThetaPoint{-1.0, 0.1, 0.2, 0.3});
        double b = gamma_zero(p, U, ThetaPoint{2.5, 0.1, 0.2, 0.3});
        EXPECT_EQ(a, b);
    }
}

TEST(Gamma, AgreesWithIncrementLaw) {
    auto p = QueueParams::normalize(0.4, {0.25, 0.20, 0.15}, StabilityPolicy::require, {3.0, 2.0, 1.0});
    ThetaPoint th{0.3, -0.2, 0.15, 0.4};
    for (auto U : all_faces(3)) {
        for (bool z : {false, true}) {
            double s = 0.0;
            for (const auto& a : increment_law(p, FaceLabel{U, z})) {
                double e = th[0] * a.dlevel;
                for (int i = 0; i < 3; ++i) e += th[static_cast<std::size_t>(i + 1)] * a.dbg[static_cast<std::size_t>(i)];
                s += a.prob * std::exp(e);
            }
            EXPECT_NEAR(z ? gamma_zero(p, U, th) : gamma_plus(p, U, th), s, 1e-14);
        }
    }
}

TEST(Gamma, RejectsBadInput) {
    EXPECT_THROW(gamma_plus(homog(), 0, ThetaPoint{0, 0, 0}), InvalidState);
    EXPECT_THROW(gamma_plus(homog(), 1, ThetaPoint{0, 0}), InvalidParameter);
}

TEST(Boundary, AnchorsForEveryFace) {
    for (auto p : {homog(), hetero()}) {
        const double a1 = std::log(1.0 / p.rho()), a0 = p.k() * a1;
        for (auto U : all_faces(p.k())) {
            EXPECT_NEAR(gamma2_plus(p, U, 0.0, 0.0), 1.0, 1e-14);
            EXPECT_NEAR(gamma2_plus(p, U, a0, a1), 1.0, 1e-12);
            auto r = gamma2_boundary(p, U, a1);
            ASSERT_TRUE(r);
            EXPECT_NEAR(*r, a0, 1e-10);
            auto r0 = gamma2_boundary(p, U, 0.0);
            ASSERT_TRUE(r0);
            EXPECT_NEAR(gamma2_plus(p, U, *r0, 0.0), 1.0, 1e-10);
        }
    }
}

TEST(Boundary, QuadraticOracleAtZeroHeight) {
    // λe^{2t} − (1 − μ₂)e^{t} + μ₁ = 0 with t = η₀
    auto p = homog();
    auto q = oracle::quadratic_roots(0.4, -0.7, 0.3);
    ASSERT_EQ(q.size(), 2u);
    double x1 = q[0], x2 = q[1];
    auto r = gamma2_section_roots(p, 0b01, 0.0);
    ASSERT_TRUE(r);
    EXPECT_NEAR(std::exp(r->upper), std::max(x1, x2), 1e-12);
    EXPECT_NEAR(std::exp(r->lower), std::min(x1, x2), 1e-12);
    EXPECT_NEAR(r->upper, 0.0, 1e-12);
    EXPECT_NEAR(std::exp(r->lower), 0.75, 1e-12);
}

TEST(Boundary, QuadraticOracleOffAxis) {
    auto p = hetero();
    const double e1 = 0.2;
    for (int i = 0; i < 3; ++i) {
        std::uint32_t U = 1u << i;
        double S = p.mu_total() - p.mu(i);
        // with x = e^{η₀ − 2η₁}: λx² − (1 − S e^{−η₁})x + μᵢ = 0
        auto q = oracle::quadratic_roots(p.lambda(), -(1.0 - S * std::exp(-e1)), p.mu(i));
        ASSERT_EQ(q.size(), 2u);
        double x1 = q[0], x2 = q[1];
        auto r = gamma2_section_roots(p, U, e1);
        ASSERT_TRUE(r);
        EXPECT_NEAR(r->upper, std::log(std::max(x1, x2)) + 2 * e1, 1e-10);
        EXPECT_NEAR(r->lower, std::log(std::min(x1, x2)) + 2 * e1, 1e-10);
    }
}

TEST(Boundary, TieFaceIsDecreasingAndBoundedAbove) {
    auto p = homog();
    auto r = gamma2_section_roots(p, 0b11, 0.3);
    ASSERT_TRUE(r);
    EXPECT_EQ(r->lower, r->upper);
    EXPECT_NEAR(gamma2_plus(p, 0b11, r->upper, 0.3), 1.0, 1e-10);
    EXPECT_LT(gamma2_plus(p, 0b11, r->upper + 1.0, 0.3), 1.0);
    EXPECT_GT(gamma2_plus(p, 0b11, r->upper - 1.0, 0.3), 1.0);
    // λe^{η₁} ≥ 1 leaves nothing below 1
    EXPECT_FALSE(gamma2_boundary(p, 0b11, std::log(1.0 / 0.4) + 0.01));
}

TEST(Boundary, EmptySectionReportsNone) { EXPECT_FALSE(gamma2_boundary(homog(), 0b01, -1.0)); }

TEST(Sections, ConvexityAndAnchorProbe) {
    for (auto p : {homog(), hetero()}) {
        auto probe = probe_sections(p, 11, 300);
        EXPECT_LE(probe.max_convexity_violation, 1e-12);
        EXPECT_LE(probe.max_anchor_residual, 1e-12);
        EXPECT_LE(probe.max_boundary_anchor_error, 1e-10);
    }
}

TEST(Ladder, ZetaShape) {
    auto z = zeta(3, 0b101, 1.2);
    EXPECT_EQ(z, (ThetaPoint{1.2, 0.6, 0.0, 0.6}));
}

TEST(Ladder, CertificateBelowOneUpToLimit) {
    for (auto p : {homog(), hetero()}) {
        double a0 = std::log(1.0 / p.decay_target());
        EXPECT_LT(c1_certificate(p, 0.5 * a0), 1.0);
        EXPECT_LT(c1_certificate(p, a0 - 1e-6), 1.0);
    }
}

TEST(Domain, ConvergesToDecayExponent) {
    for (auto p : {homog(), hetero()}) {
        const int k = p.k();
        const double a0 = std::log(1.0 / p.decay_target());
        auto tr = domain_iterate(p, 0.5 * std::log(1.0 / p.rho()));
        ASSERT_TRUE(tr.converged);
        EXPECT_NEAR(tr.limit0, a0, 1e-6);
        EXPECT_NEAR(tr.limit1, a0 / (k - 1), 1e-6);
        for (std::size_t l = 0; l < tr.steps.size(); ++l) {
            const auto& s = tr.steps[l];
            EXPECT_EQ(s.bar1, s.bar0 / (k - 1));
            EXPECT_LE(s.eta1, s.eta0 / k + 1e-9);
            EXPECT_TRUE(s.eta1_within_bound);
            if (l > 0) {
                EXPECT_GE(s.bar0, tr.steps[l - 1].bar0);
                EXPECT_GE(s.bar1, tr.steps[l - 1].bar1);
            }
        }
    }
}

TEST(Domain, HomogeneousTwoQueueLimit) {
    auto p = homog();
    auto tr = domain_iterate(p, 0.1);
    EXPECT_NEAR(tr.limit1, 2 * std::log(1.5), 1e-6);
}

TEST(Domain, PartialTraceFlagged) {
    auto tr = domain_iterate(homog(), 0.1, 1e-10, 1);
    EXPECT_FALSE(tr.converged);
    EXPECT_EQ(tr.steps.size(), 1u);
    EXPECT_THROW(domain_iterate(homog(), 0.0), InvalidParameter);
    EXPECT_THROW(domain_iterate(QueueParams::normalize(0.7, {0.3, 0.3}, StabilityPolicy::allow_unstable), 0.1), UnstableSystem);
}

TEST(Domain, BoundaryCurvesHaveBothBranches) {
    auto rows = boundary_curves(hetero(), {0.0, 0.2, 0.4});
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) {
        ASSERT_EQ(r.upper.size(), 7u);
        EXPECT_LE(r.lower[0], r.upper[0]);
    }
}

class StationaryIdentity : public ::testing::Test {
protected:
    QueueParams p = homog();
    BackgroundIndex idx = BackgroundIndex::enumerate(2, 10);
    StationaryDist d = solve_direct(build_kernel(p, idx, 40));
};

TEST_F(StationaryIdentity, VanishesAtOrigin) { EXPECT_EQ(stationary_identity_residual(p, d, idx, ThetaPoint{0, 0, 0}), 0.0); }

TEST_F(StationaryIdentity, ResidualSmallForNegativeTheta) {
    EXPECT_LE(stationary_identity_residual(p, d, idx, ThetaPoint{-0.1, -0.1, -0.1}), 1e-8);
}

TEST(StationaryInequality, SlackInsideDomainShrinksWithTruncation) {
    auto p = homog();
    ThetaPoint th{0.3, 0.2, 0.2};
    double prev = -1.0;
    for (int D : {8, 10, 12, 14}) {
        auto idx = BackgroundIndex::enumerate(2, D);
        double s = stationary_inequality_slack(p, solve_direct(build_kernel(p, idx, 40)), idx, th);
        EXPECT_GT(s, prev) << D;
        prev = s;
    }
    EXPECT_GE(prev, -1e-8);
}

TEST_F(StationaryIdentity, FaceDecomposition) {
    ThetaPoint th{0.2, 0.1, -0.3};
    auto m = face_moments(d, idx, th);
    double s = 0.0, direct = 0.0;
    for (auto U : all_faces(2)) s += m.plus[U] + m.zero[U];
    for (int n = 0; n <= d.L_max; ++n)
        for (std::size_t b = 0; b < idx.size(); ++b) {
            auto h = idx.state(b);
            direct += d.at(n, b) * std::exp(th[0] * n + th[1] * h[0] + th[2] * h[1]);
        }
    EXPECT_NEAR(s, m.total, 1e-14 * m.total);
    EXPECT_NEAR(s, direct, 1e-13 * direct);
}

TEST_F(StationaryIdentity, FaceMomentsIgnoreInactiveCoordinates) {
    ThetaPoint th{0.2, 0.1, -0.3};
    auto base = face_moments(d, idx, th);
    // θ₁ never meets h₁ on faces containing queue 1, and θ₀ never meets level 0
    ThetaPoint th1 = th;
    th1[1] = 1.7;
    auto m1 = face_moments(d, idx, th1);
    ThetaPoint th0 = th;
    th0[0] = -2.0;
    auto m0 = face_moments(d, idx, th0);
    for (auto U : all_faces(2)) {
        if (U & 1u) {
            EXPECT_EQ(m1.plus[U], base.plus[U]);
            EXPECT_EQ(m1.zero[U], base.zero[U]);
        }
        EXPECT_EQ(m0.zero[U], base.zero[U]);
    }
}
