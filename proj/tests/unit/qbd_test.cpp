#include <gtest/gtest.h>

#include "jsq/qbd.hpp"
#include "jsq/solver.hpp"
#include "oracles.hpp"

using namespace jsq;

namespace {

QueueParams homog() { return QueueParams::normalize(0.4, {0.3, 0.3}); }
QueueParams hetero() { return QueueParams::normalize(0.4, {0.25, 0.20, 0.15}); }

Eigen::Index at(const BackgroundIndex& idx, std::vector<int> h) { return static_cast<Eigen::Index>(idx.index_of(h)); }

} // namespace

TEST(Blocks, EntryExamples) {
    auto idx = BackgroundIndex::enumerate(2, 4);
    auto b = build_blocks(homog(), idx);
    auto h01 = at(idx, {0, 1}), h00 = at(idx, {0, 0}), h10 = at(idx, {1, 0});
    EXPECT_DOUBLE_EQ(b.A_plus(h01, h00), 0.4);
    EXPECT_DOUBLE_EQ(b.A_plus.row(h01).sum(), 0.4);
    EXPECT_DOUBLE_EQ(b.A_zero(h00, h10), 0.2);
    EXPECT_DOUBLE_EQ(b.A_zero(h00, h01), 0.2);
    EXPECT_DOUBLE_EQ(b.A_zero.row(h00).sum(), 0.4);
    EXPECT_DOUBLE_EQ(b.A_minus(h00, h10), 0.3);
    EXPECT_DOUBLE_EQ(b.A_minus(h00, h01), 0.3);
    EXPECT_DOUBLE_EQ(b.B_zero(h00, h00), 0.6);
}

TEST(Blocks, RowSumsAndSparsity) {
    for (auto p : {homog(), hetero()}) {
        auto idx = BackgroundIndex::enumerate(p.k(), 5);
        auto b = build_blocks(p, idx);
        Eigen::VectorXd s = (b.A_minus + b.A_zero + b.A_plus).rowwise().sum();
        Eigen::VectorXd s0 = (b.B_zero + b.A_plus).rowwise().sum();
        for (std::size_t h = 0; h < idx.size(); ++h) {
            auto i = static_cast<Eigen::Index>(h);
            EXPECT_NEAR(s(i), 1.0, 1e-14);
            EXPECT_NEAR(s0(i), 1.0, 1e-14);
            if (idx.face(h).size() >= 2) EXPECT_EQ(b.A_plus.row(i).sum(), 0.0);
            if (idx.interior(h)) EXPECT_FALSE(b.boundary[h]);
            EXPECT_GE(b.A_minus.minCoeff(), 0.0);
        }
    }
}

TEST(SolveR, MonotoneResidualAndSpectralRadius) {
    auto idx = BackgroundIndex::enumerate(2, 12);
    auto b = build_blocks(homog(), idx);
    auto rf = solve_R(b, 1e-14);
    EXPECT_TRUE(rf.monotone);
    EXPECT_LE(rf.residual, 1e-12);
    EXPECT_GE(rf.R.minCoeff(), 0.0);
    EXPECT_NEAR(rf.spectral_radius, oracle::spectral_radius_eigen(rf.R), 1e-10);
    EXPECT_NEAR(rf.spectral_radius, 4.0 / 9.0, 1e-3);
}

TEST(SolveR, IteratesBoundedByLimit) {
    auto idx = BackgroundIndex::enumerate(3, 3);
    auto b = build_blocks(hetero(), idx);
    auto rf = solve_R(b, 1e-14);
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(b.size(), b.size());
    for (int t = 0; t < 50; ++t) {
        Eigen::MatrixXd next = b.A_plus + R * b.A_zero + R * R * b.A_minus;
        EXPECT_GE((next - R).minCoeff(), -1e-16);
        EXPECT_LE((next - rf.R).maxCoeff(), 1e-13);
        R = next;
    }
}

TEST(SolveR, GapShrinksInD) {
    auto rows = qbd_study(homog(), {6, 8, 10, 12});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        EXPECT_LT(rows[i].gap, rows[i - 1].gap);
        EXPECT_LT(rows[i].left_eigen_residual, rows[i - 1].left_eigen_residual);
    }
    EXPECT_LE(rows.back().gap, 1e-3);
}

TEST(SolveR, IterationCap) { EXPECT_THROW(solve_R(build_blocks(homog(), BackgroundIndex::enumerate(2, 4)), 1e-14, 3), ConvergenceFailure); }

TEST(MatrixGeometric, MatchesDirectSolve) {
    auto p = homog();
    auto idx = BackgroundIndex::enumerate(2, 10);
    auto b = build_blocks(p, idx);
    auto rf = solve_R(b);
    auto pi0 = boundary_vector(b, rf);
    auto slices = matrix_geometric_pi(rf, pi0, 41);
    EXPECT_EQ(slices[0], pi0);
    EXPECT_NEAR(matrix_geometric_mass(rf, pi0), 1.0, 1e-10);
    auto d = solve_direct(build_kernel(p, idx, 40));
    double l1 = 0.0, l1_0 = 0.0;
    for (std::size_t h = 0; h < idx.size(); ++h) {
        l1 += std::abs(slices[5](static_cast<Eigen::Index>(h)) - d.at(5, h));
        l1_0 += std::abs(pi0(static_cast<Eigen::Index>(h)) - d.at(0, h));
    }
    EXPECT_LE(l1, 1e-4);
    EXPECT_LE(l1_0, 1e-10);
}

TEST(MatrixGeometric, RefusesSupercriticalR) {
    RFactor rf;
    rf.R = Eigen::MatrixXd::Identity(2, 2);
    rf.spectral_radius = 1.0;
    EXPECT_THROW(matrix_geometric_pi(rf, Eigen::VectorXd::Ones(2), 3), UnstableSystem);
    QbdBlocks b;
    EXPECT_THROW(boundary_vector(b, rf), UnstableSystem);
}

TEST(InvariantPair, ResidualAndTwistedChain) {
    for (auto p : {homog(), hetero()}) {
        for (int D : {4, 6}) {
            auto idx = BackgroundIndex::enumerate(p.k(), D);
            auto b = build_blocks(p, idx);
            auto ip = invariant_pair(p, b, idx);
            EXPECT_LE(ip.interior_residual, 1e-12);
            EXPECT_LE(ip.twisted_row_error, 1e-12);
            EXPECT_NEAR(ip.xy, 1.0, 1e-10);
            EXPECT_GT(ip.x.minCoeff(), 0.0);
            EXPECT_NEAR(ip.alpha, std::pow(p.rho(), -p.k()), 1e-12);
            auto T = twisted_matrix(p, idx);
            EXPECT_LE((T.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
            EXPECT_LE((ip.nu.transpose() * T - ip.nu.transpose()).cwiseAbs().maxCoeff(), 1e-14);
        }
    }
}

TEST(InvariantPair, ExactlyZeroInRationals) {
    for (auto p : {homog(), hetero(), QueueParams::normalize(0.3, {0.1, 0.35, 0.25})}) {
        for (int D : {4, 6}) EXPECT_EQ(exact_invariant_residual(p, BackgroundIndex::enumerate(p.k(), D)), Rational(0));
    }
}

TEST(InvariantPair, ExactForWeightedSplit) {
    auto p = QueueParams::normalize(0.4, {0.25, 0.20, 0.15}, StabilityPolicy::require, {3.0, 2.0, 1.0});
    EXPECT_EQ(exact_invariant_residual(p, BackgroundIndex::enumerate(3, 4)), Rational(0));
}

TEST(InvariantPair, CorruptBlockDetected) {
    auto p = homog();
    auto idx = BackgroundIndex::enumerate(2, 5);
    auto b = build_blocks(p, idx);
    b.A_zero(0, 1) += 0.01;
    EXPECT_THROW(invariant_pair(p, b, idx), InternalConsistency);
}

TEST(Prefactor, ProportionalToXAndPositive) {
    auto p = hetero();
    auto idx = BackgroundIndex::enumerate(3, 6);
    auto b = build_blocks(p, idx);
    auto rf = solve_R(b);
    auto pi0 = boundary_vector(b, rf);
    auto ip = invariant_pair(p, b, idx);
    auto pf = prefactor(b, rf, ip, pi0);
    Eigen::VectorXd q = pf.c.cwiseQuotient(ip.x);
    EXPECT_LE((q.array() - q(0)).abs().maxCoeff(), 1e-10 * q(0));
    for (std::size_t h = 0; h < idx.size(); ++h)
        if (idx.total(h) <= 3) EXPECT_GT(pf.c(static_cast<Eigen::Index>(h)), 0.0);
    QbdBlocks bad = b;
    InvariantPair flipped = ip;
    flipped.x = -ip.x;
    EXPECT_THROW(prefactor(bad, rf, flipped, pi0), NumericError);
}

TEST(Prefactor, LimitOfScaledSlices) {
    auto p = homog();
    auto idx = BackgroundIndex::enumerate(2, 10);
    auto b = build_blocks(p, idx);
    auto rf = solve_R(b);
    auto pi0 = boundary_vector(b, rf);
    auto ip = invariant_pair(p, b, idx);
    auto pf = prefactor(b, rf, ip, pi0);
    auto d = solve_direct(build_kernel(p, idx, 50));
    auto h = idx.index_of(std::vector<int>{0, 0});
    double scaled = std::pow(ip.alpha, 35) * d.at(35, h);
    EXPECT_NEAR(scaled / pf.c(static_cast<Eigen::Index>(h)), 1.0, 0.05);
    EXPECT_LE(pf.left_eigen_residual, 1e-3);
}

TEST(Pi0y, IncreasingAndCauchyInD) {
    auto rows = qbd_study(homog(), {10, 12, 14, 16});
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(rows[i].pi0_y, rows[i - 1].pi0_y);
    EXPECT_LE(rows.back().pi0_y - rows[rows.size() - 2].pi0_y, 1e-6);
}

TEST(LevelGcd, OneArithmetic) {
    EXPECT_EQ(level_gcd(build_blocks(homog(), BackgroundIndex::enumerate(2, 4))), 1);
    EXPECT_EQ(level_gcd(build_blocks(hetero(), BackgroundIndex::enumerate(3, 3))), 1);
}
