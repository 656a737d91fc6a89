#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/gth.hpp"
#include "jsq/kernel.hpp"
#include "jsq/model.hpp"
#include "jsq/rational.hpp"
#include "jsq/statespace.hpp"

namespace jsq {

template <class Scalar>
using SparseRows = std::vector<std::vector<std::pair<std::size_t, Scalar>>>;

template <class Scalar>
void add_entry(SparseRows<Scalar>& rows, std::size_t i, std::size_t j, const Scalar& v) {
    for (auto& e : rows[i])
        if (e.first == j) {
            e.second += v;
            return;
        }
    rows[i].emplace_back(j, v);
}

/// Block entries in any scalar type. Rows flagged `boundary` had a target
/// outside H_D; that mass sits on the A₀ (resp. B₀) diagonal.
template <class Scalar>
struct BlockEntries {
    std::size_t n = 0;
    SparseRows<Scalar> A_minus, A_zero, A_plus, B_zero;
    std::vector<bool> boundary;
};

template <class Scalar>
BlockEntries<Scalar> build_block_entries(const Rates<Scalar>& rates, const BackgroundIndex& idx) {
    BlockEntries<Scalar> b;
    b.n = idx.size();
    b.A_minus.resize(b.n);
    b.A_zero.resize(b.n);
    b.A_plus.resize(b.n);
    b.B_zero.resize(b.n);
    b.boundary.assign(b.n, false);
    for (std::size_t h = 0; h < b.n; ++h) {
        for (const auto& inc : increment_law(rates, idx.face(h, false))) {
            auto t = shifted(idx, h, inc.dbg);
            if (!t) {
                add_entry(b.A_zero, h, h, inc.prob);
                b.boundary[h] = true;
                continue;
            }
            auto& blk = inc.dlevel < 0 ? b.A_minus : inc.dlevel > 0 ? b.A_plus : b.A_zero;
            add_entry(blk, h, *t, inc.prob);
        }
        for (const auto& inc : increment_law(rates, idx.face(h, true))) {
            if (inc.dlevel > 0) continue; // the same A₊₁ entry as above
            auto t = shifted(idx, h, inc.dbg);
            if (!t) b.boundary[h] = true;
            add_entry(b.B_zero, h, t ? *t : h, inc.prob);
        }
    }
    return b;
}

inline Eigen::MatrixXd to_dense(const SparseRows<double>& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (const auto& [j, v] : rows[i]) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += v;
    return M;
}

struct QbdBlocks {
    Eigen::MatrixXd A_minus, A_zero, A_plus, B_zero;
    std::vector<bool> boundary;
    std::vector<bool> interior;
    int k = 0;
    int D = 0;
    double rho = 0.0;

    Eigen::Index size() const { return A_zero.rows(); }
    /// A_*(z) = z⁻¹A₋₁ + A₀ + zA₊₁
    Eigen::MatrixXd generating(double z) const { return A_minus / z + A_zero + z * A_plus; }
};

inline QbdBlocks build_blocks(const QueueParams& p, const BackgroundIndex& idx) {
    if (idx.k() != p.k()) throw InvalidParameter("background index and parameters disagree on k");
    auto e = build_block_entries(p.rates(), idx);
    QbdBlocks b;
    b.A_minus = to_dense(e.A_minus);
    b.A_zero = to_dense(e.A_zero);
    b.A_plus = to_dense(e.A_plus);
    b.B_zero = to_dense(e.B_zero);
    b.boundary = e.boundary;
    b.interior.resize(idx.size());
    for (std::size_t h = 0; h < idx.size(); ++h) b.interior[h] = idx.interior(h);
    b.k = p.k();
    b.D = idx.bound();
    b.rho = p.rho();
    return b;
}

/// max row sum of |M|
inline double inf_norm(const Eigen::MatrixXd& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); }

struct RFactor {
    Eigen::MatrixXd R;
    std::size_t iterations = 0;
    double residual = 0.0;
    double spectral_radius = 0.0;
    /// most negative entrywise step seen; ≥ 0 up to rounding for a monotone run
    double min_step = 0.0;
    bool monotone = true;
};

inline double r_equation_residual(const QbdBlocks& b, const Eigen::MatrixXd& R) {
    return inf_norm(b.A_plus + R * b.A_zero + R * R * b.A_minus - R);
}

/// Perron root of a nonnegative matrix by power iteration on M + I with
/// Collatz-Wielandt bracketing. Zero rows only contribute eigenvalue 0 and
/// are dropped first, since they would pin the lower bracket at zero.
inline double perron_root(const Eigen::MatrixXd& M, double tol = 1e-14, std::size_t max_iters = 200000) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        if (M.row(i).maxCoeff() > 0) keep.push_back(i);
    if (keep.empty()) return 0.0;
    const auto n = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd S(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) S(i, j) = M(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
    double lo = 0.0, hi = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        Eigen::VectorXd w = S * v + v;
        lo = std::numeric_limits<double>::infinity();
        hi = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double r = w(i) / v(i);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        v = w / w.maxCoeff();
        if (hi - lo <= tol * hi) return 0.5 * (lo + hi) - 1.0;
    }
    throw ConvergenceFailure("power method for the spectral radius did not settle", hi - lo, max_iters);
}

/// Minimal nonnegative solution of R = A₊₁ + RA₀ + R²A₋₁ by the natural
/// iteration from R = 0.
inline RFactor solve_R(const QbdBlocks& b, double tol = 1e-14, std::size_t max_iters = 200000) {
    RFactor out;
    const Eigen::Index n = b.size();
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
    double diff = 0.0;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        Eigen::MatrixXd next = b.A_plus + R * b.A_zero + R * R * b.A_minus;
        Eigen::MatrixXd step = next - R;
        out.min_step = std::min(out.min_step, step.minCoeff());
        diff = step.cwiseAbs().maxCoeff();
        R = std::move(next);
        if (diff <= tol) {
            out.iterations = it;
            out.R = std::move(R);
            out.residual = r_equation_residual(b, out.R);
            out.monotone = out.min_step >= -1e-15 * std::max(1.0, out.R.maxCoeff());
            out.spectral_radius = perron_root(out.R);
            return out;
        }
    }
    throw ConvergenceFailure("R iteration hit the iteration cap", diff, max_iters);
}

/// π₀ with π₀(B₀ + RA₋₁) = π₀ and π₀(I − R)⁻¹1 = 1.
inline Eigen::VectorXd boundary_vector(const QbdBlocks& b, const RFactor& r) {
    if (!(r.spectral_radius < 1.0)) throw UnstableSystem("spectral radius of R is not below 1");
    Eigen::MatrixXd C = b.B_zero + r.R * b.A_minus;
    Eigen::VectorXd pi0 = gth_dense(C);
    const Eigen::Index n = b.size();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd mass = (I - r.R).transpose().partialPivLu().solve(pi0);
    return pi0 / mass.sum();
}

/// Level slices π₀Rⁿ, n = 0..levels-1.
inline std::vector<Eigen::VectorXd> matrix_geometric_pi(const RFactor& r, const Eigen::VectorXd& pi0, int levels) {
    if (!(r.spectral_radius < 1.0)) throw UnstableSystem("spectral radius of R is not below 1");
    std::vector<Eigen::VectorXd> out;
    Eigen::RowVectorXd cur = pi0.transpose();
    for (int n = 0; n < levels; ++n) {
        out.push_back(cur.transpose());
        cur = cur * r.R;
    }
    return out;
}

/// Σₙ π₀Rⁿ1 in closed form.
inline double matrix_geometric_mass(const RFactor& r, const Eigen::VectorXd& pi0) {
    const Eigen::Index n = r.R.rows();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    return (I - r.R).transpose().partialPivLu().solve(pi0).sum();
}

/// yₕ = ρ^{−h·1}
inline Eigen::VectorXd invariant_y(double rho, const BackgroundIndex& idx) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t h = 0; h < idx.size(); ++h) y(static_cast<Eigen::Index>(h)) = std::pow(rho, -idx.total(h));
    return y;
}

/// Δ_y⁻¹A_*(α)Δ_y built from the increment laws; a twisted atom whose
/// target leaves H_D stays on the diagonal, so every row sums to one.
inline Eigen::MatrixXd twisted_matrix(const QueueParams& p, const BackgroundIndex& idx) {
    const double alpha = std::pow(p.rho(), -p.k());
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t h = 0; h < idx.size(); ++h) {
        for (const auto& inc : increment_law(p, idx.face(h, false))) {
            int dsum = std::accumulate(inc.dbg.begin(), inc.dbg.end(), 0);
            double w = inc.prob * std::pow(alpha, inc.dlevel) * std::pow(p.rho(), -dsum);
            auto t = shifted(idx, h, inc.dbg);
            T(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(t ? *t : h)) += w;
        }
    }
    return T;
}

struct InvariantPair {
    double alpha = 0.0;
    Eigen::VectorXd y, x, nu;
    /// max over interior rows of |(A_*(α)y − y)ₕ|, absolute and relative to yₕ
    double interior_residual = 0.0;
    double interior_residual_rel = 0.0;
    /// max over interior rows of |Σ twisted row − 1| (before diagonal fill)
    double twisted_row_error = 0.0;
    double xy = 0.0;
};

inline InvariantPair invariant_pair(const QueueParams& p, const QbdBlocks& b, const BackgroundIndex& idx,
                                    double tol = 1e-12) {
    if (!p.stable()) throw UnstableSystem("invariant vectors need rho < 1");
    InvariantPair ip;
    ip.alpha = std::pow(p.rho(), -p.k());
    ip.y = invariant_y(p.rho(), idx);
    Eigen::VectorXd res = b.generating(ip.alpha) * ip.y - ip.y;
    Eigen::MatrixXd Tfull = b.generating(ip.alpha);
    for (Eigen::Index h = 0; h < b.size(); ++h) {
        if (!b.interior[static_cast<std::size_t>(h)]) continue;
        ip.interior_residual = std::max(ip.interior_residual, std::abs(res(h)));
        ip.interior_residual_rel = std::max(ip.interior_residual_rel, std::abs(res(h)) / ip.y(h));
        double row = 0.0;
        for (Eigen::Index j = 0; j < b.size(); ++j) row += Tfull(h, j) * ip.y(j) / ip.y(h);
        ip.twisted_row_error = std::max(ip.twisted_row_error, std::abs(row - 1.0));
    }
    if (ip.interior_residual_rel > tol)
        throw InternalConsistency("A_*(rho^-k) y != y on interior rows: relative residual " +
                                  std::to_string(ip.interior_residual_rel));
    ip.nu = gth_dense(twisted_matrix(p, idx));
    ip.x = ip.nu.cwiseQuotient(ip.y);
    ip.xy = ip.x.dot(ip.y);
    ip.x /= ip.xy;
    ip.xy = ip.x.dot(ip.y);
    return ip;
}

/// Exact max |(A_*(ρ⁻ᵏ)y − y)ₕ| over interior rows, in rationals.
inline Rational exact_invariant_residual(const QueueParams& p, const BackgroundIndex& idx) {
    auto rates = exact_rates(p);
    Rational mu_sum = 0;
    for (const auto& m : rates.mu) mu_sum += m;
    const Rational rho = rates.lambda / mu_sum;
    const Rational alpha = pow_int(rho, -p.k());
    auto e = build_block_entries(rates, idx);
    std::vector<Rational> y(idx.size());
    for (std::size_t h = 0; h < idx.size(); ++h) y[h] = pow_int(rho, -idx.total(h));
    Rational worst = 0;
    for (std::size_t h = 0; h < idx.size(); ++h) {
        if (!idx.interior(h)) continue;
        Rational acc = -y[h];
        for (const auto& [j, v] : e.A_minus[h]) acc += v * y[j] / alpha;
        for (const auto& [j, v] : e.A_zero[h]) acc += v * y[j];
        for (const auto& [j, v] : e.A_plus[h]) acc += v * y[j] * alpha;
        Rational a = acc < 0 ? Rational(-acc) : acc;
        if (a > worst) worst = a;
    }
    return worst;
}

struct Prefactor {
    Eigen::VectorXd c;
    Eigen::VectorXd r;
    double pi0_r = 0.0;
    double x_r = 0.0;
    /// ‖xR − α⁻¹x‖∞ / ‖x‖∞
    double left_eigen_residual = 0.0;
    /// ‖Rr − α⁻¹r‖∞ / ‖r‖∞
    double right_eigen_residual = 0.0;
};

/// c = (π₀r / xr) x with r = (I − A₀ − RA₋₁ − α⁻¹A₋₁)y.
inline Prefactor prefactor(const QbdBlocks& b, const RFactor& rf, const InvariantPair& ip, const Eigen::VectorXd& pi0) {
    Prefactor out;
    const Eigen::Index n = b.size();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    out.r = (I - b.A_zero - rf.R * b.A_minus - b.A_minus / ip.alpha) * ip.y;
    out.pi0_r = pi0.dot(out.r);
    out.x_r = ip.x.dot(out.r);
    if (!(out.x_r > 0)) throw NumericError("x r is not positive; the prefactor is undefined");
    out.c = (out.pi0_r / out.x_r) * ip.x;
    Eigen::RowVectorXd xt = ip.x.transpose();
    out.left_eigen_residual = (xt * rf.R - xt / ip.alpha).cwiseAbs().maxCoeff() / ip.x.cwiseAbs().maxCoeff();
    out.right_eigen_residual = (rf.R * out.r - out.r / ip.alpha).cwiseAbs().maxCoeff() / out.r.cwiseAbs().maxCoeff();
    return out;
}

/// Σₕ [π₀]ₕ ρ^{−h·1}
inline double pi0_dot_y(const Eigen::VectorXd& pi0, const Eigen::VectorXd& y) { return pi0.dot(y); }

/// gcd of the level displacements of all cycles of the background graph
/// whose edges are the nonzero entries of A₋₁, A₀, A₊₁ (levels -1, 0, +1),
/// restricted to the part reachable from h = 0.
inline long level_gcd(const QbdBlocks& b) {
    const Eigen::Index n = b.size();
    std::vector<long> pot(static_cast<std::size_t>(n), 0);
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    const Eigen::MatrixXd* blocks[3] = {&b.A_minus, &b.A_zero, &b.A_plus};
    std::queue<Eigen::Index> q;
    q.push(0);
    seen[0] = true;
    long g = 0;
    while (!q.empty()) {
        auto h = q.front();
        q.pop();
        for (int d = -1; d <= 1; ++d) {
            const auto& M = *blocks[d + 1];
            for (Eigen::Index t = 0; t < n; ++t) {
                if (M(h, t) <= 0) continue;
                long want = pot[static_cast<std::size_t>(h)] + d;
                if (!seen[static_cast<std::size_t>(t)]) {
                    seen[static_cast<std::size_t>(t)] = true;
                    pot[static_cast<std::size_t>(t)] = want;
                    q.push(t);
                } else {
                    g = std::gcd(g, std::abs(want - pot[static_cast<std::size_t>(t)]));
                }
            }
        }
    }
    return g;
}

/// One row of the truncation study in D.
struct QbdStudyRow {
    int D = 0;
    std::size_t states = 0;
    std::size_t iterations = 0;
    double residual = 0.0;
    double spectral_radius = 0.0;
    double gap = 0.0;
    double left_eigen_residual = 0.0;
    double pi0_y = 0.0;
};

inline std::vector<QbdStudyRow> qbd_study(const QueueParams& p, const std::vector<int>& Ds, double tol = 1e-14) {
    std::vector<QbdStudyRow> rows;
    for (int D : Ds) {
        auto idx = BackgroundIndex::enumerate(p.k(), D);
        auto b = build_blocks(p, idx);
        auto rf = solve_R(b, tol);
        auto pi0 = boundary_vector(b, rf);
        auto ip = invariant_pair(p, b, idx);
        auto pf = prefactor(b, rf, ip, pi0);
        QbdStudyRow row;
        row.D = D;
        row.states = idx.size();
        row.iterations = rf.iterations;
        row.residual = rf.residual;
        row.spectral_radius = rf.spectral_radius;
        row.gap = std::abs(rf.spectral_radius - p.decay_target());
        row.left_eigen_residual = pf.left_eigen_residual;
        row.pi0_y = pi0_dot_y(pi0, ip.y);
        rows.push_back(row);
    }
    return rows;
}

/// Square matrix as CSV, first column the background label.
inline void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& M, const BackgroundIndex& idx) {
    os << "h";
    for (std::size_t j = 0; j < idx.size(); ++j) os << ",\"" << idx.label(j) << '"';
    os << '\n';
    os.precision(17);
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        os << '"' << idx.label(static_cast<std::size_t>(i)) << '"';
        for (Eigen::Index j = 0; j < M.cols(); ++j) os << ',' << M(i, j);
        os << '\n';
    }
}

} // namespace jsq
