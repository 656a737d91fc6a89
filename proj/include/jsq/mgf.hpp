#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/model.hpp"
#include "jsq/solver.hpp"
#include "jsq/statespace.hpp"

namespace jsq {

/// θ = (θ₀, θ₁..θ_k): θ₀ pairs with the level, θᵢ with hᵢ.
using ThetaPoint = std::vector<double>;

namespace detail {

inline void check_theta(const QueueParams& p, std::span<const double> theta) {
    if (theta.size() != static_cast<std::size_t>(p.k() + 1)) throw InvalidParameter("theta must have k+1 entries");
}

// Σ over i ∈ U of arrival_share · e^{θᵢ} plus Σ over i ∉ U of μᵢ e^{−θᵢ}
inline double common_terms(const QueueParams& p, std::uint32_t U, std::span<const double> theta, bool single) {
    double s = 0.0;
    for (int i = 0; i < p.k(); ++i) {
        double th = theta[static_cast<std::size_t>(i + 1)];
        if (U & (1u << i)) {
            if (!single) s += p.rates().arrival_share(U, i) * std::exp(th);
        } else {
            s += p.mu(i) * std::exp(-th);
        }
    }
    return s;
}

inline double sum_outside(const QueueParams& p, std::uint32_t U, std::span<const double> theta) {
    double s = 0.0;
    for (int j = 0; j < p.k(); ++j)
        if (!(U & (1u << j))) s += theta[static_cast<std::size_t>(j + 1)];
    return s;
}

inline void check_face(const QueueParams& p, std::uint32_t U) {
    if (U == 0) throw InvalidState("face has an empty set of shortest queues");
    if (U >> p.k()) throw InvalidState("face refers to a queue index >= k");
}

} // namespace detail

/// E e^{θX} for the increment on the positive-level face U.
inline double gamma_plus(const QueueParams& p, std::uint32_t U, std::span<const double> theta) {
    detail::check_theta(p, theta);
    detail::check_face(p, U);
    const double t0 = theta[0];
    const bool single = std::popcount(U) == 1;
    double s = detail::common_terms(p, U, theta, single);
    if (single) {
        int i = std::countr_zero(U);
        double out = detail::sum_outside(p, U, theta);
        s += p.lambda() * std::exp(t0 - out) + p.mu(i) * std::exp(-t0 + out);
    } else {
        double all = 0.0;
        for (int j = 0; j < p.k(); ++j) all += theta[static_cast<std::size_t>(j + 1)];
        for (int i = 0; i < p.k(); ++i)
            if (U & (1u << i)) s += p.mu(i) * std::exp(-t0 + all - theta[static_cast<std::size_t>(i + 1)]);
    }
    return s;
}

/// E e^{θX} for the increment on the zero-level face U.
inline double gamma_zero(const QueueParams& p, std::uint32_t U, std::span<const double> theta) {
    detail::check_theta(p, theta);
    detail::check_face(p, U);
    const bool single = std::popcount(U) == 1;
    double s = detail::common_terms(p, U, theta, single);
    for (int i = 0; i < p.k(); ++i)
        if (U & (1u << i)) s += p.mu(i);
    if (single) s += p.lambda() * std::exp(theta[0] - detail::sum_outside(p, U, theta));
    return s;
}

inline ThetaPoint diagonal_theta(int k, double eta0, double eta1) {
    ThetaPoint th(static_cast<std::size_t>(k + 1), eta1);
    th[0] = eta0;
    return th;
}

/// γ₊U(η₀, η₁·1)
inline double gamma2_plus(const QueueParams& p, std::uint32_t U, double eta0, double eta1) {
    return gamma_plus(p, U, diagonal_theta(p.k(), eta0, eta1));
}

inline double gamma2_zero(const QueueParams& p, std::uint32_t U, double eta0, double eta1) {
    return gamma_zero(p, U, diagonal_theta(p.k(), eta0, eta1));
}

namespace detail {

// Bisection for an increasing g on [lo, hi] with g(lo) ≤ 0 < g(hi).
template <class F>
double bisect_increasing(F g, double lo, double hi) {
    for (int it = 0; it < 300 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (g(mid) <= 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Grow hi from `start` by doubling steps until g(hi) > 0.
template <class F>
double expand_bracket(F g, double start, double step) {
    double hi = start + step;
    for (int it = 0; it < 200; ++it) {
        if (g(hi) > 0) return hi;
        step *= 2;
        hi = start + step;
    }
    throw NumericError("bisection bracket not found: the section never exceeds 1");
}

} // namespace detail

/// Roots of η₀ ↦ γ₊U⁽²⁾(η₀, η₁) − 1. For |U| = 1 the section is strictly
/// convex in η₀ and has a lower and an upper root (or none); for |U| ≥ 2 it
/// is strictly decreasing and has at most one root, reported as both.
struct SectionRoots {
    double lower;
    double upper;
};

inline std::optional<SectionRoots> gamma2_section_roots(const QueueParams& p, std::uint32_t U, double eta1) {
    detail::check_face(p, U);
    const int k = p.k();
    auto g = [&](double e0) { return gamma2_plus(p, U, e0, eta1) - 1.0; };
    if (std::popcount(U) == 1) {
        int i = std::countr_zero(U);
        // minimizer of λe^{t} + μᵢe^{−t} with t = η₀ − (k−1)η₁
        double vertex = 0.5 * std::log(p.mu(i) / p.lambda()) + (k - 1) * eta1;
        if (g(vertex) > 0) return std::nullopt;
        double hi = detail::expand_bracket(g, vertex, 1.0);
        double upper = detail::bisect_increasing(g, vertex, hi);
        auto gneg = [&](double s) { return g(-s); };
        double lo = -detail::expand_bracket(gneg, -vertex, 1.0);
        double lower = -detail::bisect_increasing(gneg, -vertex, -lo);
        return SectionRoots{lower, upper};
    }
    // η₀ → ∞ limit of the section
    double limit = 0.0;
    for (int j = 0; j < k; ++j) {
        if (U & (1u << j))
            limit += p.rates().arrival_share(U, j) * std::exp(eta1);
        else
            limit += p.mu(j) * std::exp(-eta1);
    }
    if (limit >= 1.0) return std::nullopt;
    auto gneg = [&](double e0) { return -g(e0); };
    // start where γ > 1 is certain
    double start = (k - 1) * eta1 - 1.0;
    while (g(start) <= 0) start -= 1.0 + std::abs(start);
    double hi = detail::expand_bracket(gneg, start, 1.0);
    double root = detail::bisect_increasing(gneg, start, hi);
    return SectionRoots{root, root};
}

/// Point of ∂Γ₊U⁽²⁾ at height η₁: the upper root for |U| = 1, the unique
/// root for |U| ≥ 2; nothing if the section stays above 1.
inline std::optional<double> gamma2_boundary(const QueueParams& p, std::uint32_t U, double eta1) {
    auto r = gamma2_section_roots(p, U, eta1);
    if (!r) return std::nullopt;
    return r->upper;
}

/// Feasible η₀ window {η₀ : γ₊U⁽²⁾(η₀, η₁) ≤ 1 ∀U} at height η₁.
struct FeasibleWindow {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool empty() const { return !(lo <= hi); }
};

inline FeasibleWindow feasible_window(const QueueParams& p, double eta1) {
    FeasibleWindow w;
    for (auto U : all_faces(p.k())) {
        auto r = gamma2_section_roots(p, U, eta1);
        if (!r) return {1.0, 0.0};
        w.lo = std::max(w.lo, r->lower);
        if (std::popcount(U) == 1) w.hi = std::min(w.hi, r->upper);
    }
    return w;
}

/// ζ(V): θ₀ = η₀, θᵢ = η₀/|V| for i ∈ V, 0 otherwise.
inline ThetaPoint zeta(int k, std::uint32_t V, double eta0) {
    ThetaPoint th(static_cast<std::size_t>(k + 1), 0.0);
    th[0] = eta0;
    const int v = std::popcount(V);
    for (int i = 0; i < k; ++i)
        if (V & (1u << i)) th[static_cast<std::size_t>(i + 1)] = eta0 / v;
    return th;
}

/// max of γ₊U(ζ(V)), γ₀U(ζ(V)) over |V| ≤ k−1 and U ∩ V = ∅; below 1 when
/// the ladder conditions hold at η₀.
inline double c1_certificate(const QueueParams& p, double eta0) {
    const int k = p.k();
    const std::uint32_t full = (1u << k) - 1;
    double worst = -std::numeric_limits<double>::infinity();
    for (auto V : all_faces(k)) {
        if (V == full) continue;
        auto th = zeta(k, V, eta0);
        for (auto U : all_faces(k)) {
            if (U & V) continue;
            worst = std::max({worst, gamma_plus(p, U, th), gamma_zero(p, U, th)});
        }
    }
    return worst;
}

struct DomainStep {
    double eta0 = 0.0;
    double eta1 = 0.0;
    double bar0 = 0.0;
    double bar1 = 0.0;
    /// max γ over the ladder points at η₀⁽ℓ⁾; must be < 1
    double c1 = 0.0;
    bool eta1_within_bound = true;
};

struct DomainTrace {
    double start_bar1 = 0.0;
    /// upper end of the η₁ interval on which every section meets 1
    double eta1_cap = 0.0;
    std::vector<DomainStep> steps;
    bool converged = false;
    double limit0 = 0.0;
    double limit1 = 0.0;
};

namespace detail {

// golden-section maximization of a unimodal f on [a, b]
template <class F>
std::pair<double, double> golden_max(F f, double a, double b, double tol) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        }
    }
    double best = f(b), arg = b;
    for (double x : {a, c, d}) {
        double v = f(x);
        if (v > best) best = v, arg = x;
    }
    return {arg, best};
}

} // namespace detail

/// Largest η₁ ≥ log ρ⁻¹ up to which the feasible window stays non-empty.
inline double feasible_eta1_cap(const QueueParams& p) {
    const double a = std::log(1.0 / p.rho());
    auto ok = [&](double e1) {
        auto w = feasible_window(p, e1);
        return w.hi - w.lo >= -1e-12;
    };
    double step = 1e-3 * a;
    if (!ok(a + step)) return a;
    double lo = a + step, hi = a + 2 * step;
    while (ok(hi)) {
        lo = hi;
        hi = a + 2 * (hi - a);
        if (hi > 1e3) throw NumericError("feasible eta1 interval appears unbounded");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

/// The expansion iteration: η⁽ℓ⁾ maximizes η₀ over the feasible region with
/// η₁ ≤ η̄₁⁽ℓ⁻¹⁾, then η̄⁽ℓ⁾ = (η₀⁽ℓ⁾, η₀⁽ℓ⁾/(k−1)).
inline DomainTrace domain_iterate(const QueueParams& p, double eta1_start, double tol = 1e-10, int max_iters = 100) {
    if (!p.stable()) throw UnstableSystem("the domain iteration needs rho < 1");
    if (!(eta1_start > 0)) throw InvalidParameter("starting eta1 must be positive");
    const int k = p.k();
    DomainTrace tr;
    tr.start_bar1 = eta1_start;
    tr.eta1_cap = feasible_eta1_cap(p);
    auto upper = [&](double e1) { return feasible_window(p, e1).hi; };
    double bar0 = 0.0, bar1 = eta1_start;
    for (int it = 0; it < max_iters; ++it) {
        double right = std::min(bar1, tr.eta1_cap);
        auto [e1, e0] = detail::golden_max(upper, 0.0, right, 1e-12);
        DomainStep s;
        s.eta0 = e0;
        s.eta1 = e1;
        s.bar0 = e0;
        s.bar1 = e0 / (k - 1);
        s.c1 = c1_certificate(p, e0);
        s.eta1_within_bound = e1 <= e0 / k + 1e-9;
        if (!tr.steps.empty() && (s.bar0 < tr.steps.back().bar0 - 1e-12 || s.bar1 < tr.steps.back().bar1 - 1e-12))
            throw InternalConsistency("domain iterates decreased");
        tr.steps.push_back(s);
        bool done = std::abs(s.bar0 - bar0) <= tol;
        bar0 = s.bar0;
        bar1 = s.bar1;
        if (done) {
            tr.converged = true;
            break;
        }
    }
    tr.limit0 = bar0;
    tr.limit1 = bar1;
    return tr;
}

/// Boundary curves for plotting: for each η₁, the upper and lower roots of
/// every face section (NaN where absent).
struct BoundaryRow {
    double eta1;
    std::vector<double> lower, upper;
};

inline std::vector<BoundaryRow> boundary_curves(const QueueParams& p, const std::vector<double>& eta1_grid) {
    std::vector<BoundaryRow> rows;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double e1 : eta1_grid) {
        BoundaryRow r{e1, {}, {}};
        for (auto U : all_faces(p.k())) {
            auto s = gamma2_section_roots(p, U, e1);
            r.lower.push_back(s ? s->lower : nan);
            r.upper.push_back(s ? s->upper : nan);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Truncated φ₊U(θ) and φ₀U(θ), indexed by face mask.
struct FaceMoments {
    std::vector<double> plus, zero;
    double total = 0.0;
};

inline FaceMoments face_moments(const StationaryDist& d, const BackgroundIndex& idx, std::span<const double> theta) {
    const int k = idx.k();
    if (theta.size() != static_cast<std::size_t>(k + 1)) throw InvalidParameter("theta must have k+1 entries");
    FaceMoments m;
    m.plus.assign(std::size_t{1} << k, 0.0);
    m.zero.assign(std::size_t{1} << k, 0.0);
    for (int n = 0; n <= d.L_max; ++n) {
        for (std::size_t b = 0; b < idx.size(); ++b) {
            auto h = idx.state(b);
            double e = n == 0 ? 0.0 : theta[0] * n;
            for (int i = 0; i < k; ++i)
                if (h[static_cast<std::size_t>(i)] != 0) e += theta[static_cast<std::size_t>(i + 1)] * h[static_cast<std::size_t>(i)];
            double w = d.at(n, b) * std::exp(e);
            (n == 0 ? m.zero : m.plus)[idx.face_mask(b)] += w;
            m.total += w;
        }
    }
    return m;
}

/// Σ_U (1−γ₊U)φ₊U + (1−γ₀U)φ₀U, signed.
inline double stationary_identity_signed(const QueueParams& p, const StationaryDist& d, const BackgroundIndex& idx,
                                         std::span<const double> theta) {
    auto m = face_moments(d, idx, theta);
    double s = 0.0;
    for (auto U : all_faces(p.k()))
        s += (1.0 - gamma_plus(p, U, theta)) * m.plus[U] + (1.0 - gamma_zero(p, U, theta)) * m.zero[U];
    return s;
}

inline double stationary_identity_residual(const QueueParams& p, const StationaryDist& d, const BackgroundIndex& idx,
                                           std::span<const double> theta) {
    return std::abs(stationary_identity_signed(p, d, idx, theta));
}

/// Σ_U (γ₀U − 1)φ₀U − Σ_U (1 − γ₊U)φ₊U; non-negative when the stationary
/// inequality holds.
inline double stationary_inequality_slack(const QueueParams& p, const StationaryDist& d, const BackgroundIndex& idx,
                                          std::span<const double> theta) {
    auto m = face_moments(d, idx, theta);
    double rhs = 0.0, lhs = 0.0;
    for (auto U : all_faces(p.k())) {
        rhs += (gamma_zero(p, U, theta) - 1.0) * m.zero[U];
        lhs += (1.0 - gamma_plus(p, U, theta)) * m.plus[U];
    }
    return rhs - lhs;
}

/// Numerical probes of the section properties: worst midpoint-convexity
/// violation along random segments, and the anchor residuals.
struct SectionProbe {
    double max_convexity_violation = 0.0;
    double max_anchor_residual = 0.0;
    double max_boundary_anchor_error = 0.0;
};

inline SectionProbe probe_sections(const QueueParams& p, std::uint64_t seed = 1, int segments = 200) {
    SectionProbe out;
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    const double a0 = std::log(p.decay_target() > 0 ? 1.0 / p.decay_target() : 1.0);
    const double a1 = std::log(1.0 / p.rho());
    for (auto U : all_faces(p.k())) {
        for (int s = 0; s < segments; ++s) {
            double x0 = coord(gen), x1 = coord(gen), y0 = coord(gen), y1 = coord(gen);
            double mid = gamma2_plus(p, U, 0.5 * (x0 + y0), 0.5 * (x1 + y1));
            double avg = 0.5 * (gamma2_plus(p, U, x0, x1) + gamma2_plus(p, U, y0, y1));
            out.max_convexity_violation = std::max(out.max_convexity_violation, mid - avg);
        }
        out.max_anchor_residual = std::max(
            {out.max_anchor_residual, std::abs(gamma2_plus(p, U, 0.0, 0.0) - 1.0), std::abs(gamma2_plus(p, U, a0, a1) - 1.0)});
        auto r = gamma2_boundary(p, U, a1);
        out.max_boundary_anchor_error =
            std::max(out.max_boundary_anchor_error, r ? std::abs(*r - a0) : std::numeric_limits<double>::infinity());
    }
    return out;
}

} // namespace jsq
