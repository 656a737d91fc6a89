#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/kernel.hpp"
#include "jsq/model.hpp"
#include "jsq/solver.hpp"
#include "jsq/statespace.hpp"

namespace jsq {

/// f(h) = ½ Σ_{j<m} (hⱼ − h_m)²
inline double quadratic_potential(std::span<const int> h) {
    double s = 0.0;
    for (std::size_t j = 0; j < h.size(); ++j)
        for (std::size_t m = j + 1; m < h.size(); ++m) {
            double d = h[j] - h[m];
            s += d * d;
        }
    return 0.5 * s;
}

struct QuadraticStateCheck {
    std::vector<int> h;
    double expected_next = 0.0;  // Σ_{h'} p_{h,h'} f(h')
    double closed_form = 0.0;    // f + (λ−Σμ)h·1 + (k−1)/2 − kρ Σ μⱼhⱼ
    double bound = 0.0;          // f + (λ−Σμ)h·1 + (k−1)/2
    bool in_F = false;
};

struct QuadraticCertificate {
    double epsilon = 0.0;
    int box_bound = 0;
    std::size_t states_checked = 0;
    /// F = {h : h·1 ≤ F_threshold}
    double F_threshold = 0.0;
    std::size_t F_size = 0;
    /// worst one-step drift of f outside F, and its negation
    double max_violation = -std::numeric_limits<double>::infinity();
    double margin = 0.0;
    /// max |measured − closed form| over the box
    double closed_form_error = 0.0;
    /// max (measured − bound); ≤ 0 when the bound holds
    double bound_excess = -std::numeric_limits<double>::infinity();
    bool holds = false;
    std::vector<QuadraticStateCheck> states;
};

/// Background transitions of the twisted chain Δ_y⁻¹A_*(ρ⁻ᵏ)Δ_y from h on the
/// unbounded background space, targets re-based to min 0.
inline std::vector<std::pair<std::vector<int>, double>> twisted_row(const QueueParams& p, std::span<const int> h) {
    const int k = p.k();
    FaceLabel face = face_of(h, false);
    const double alpha = std::pow(p.rho(), -k);
    std::vector<std::pair<std::vector<int>, double>> out;
    for (const auto& a : increment_law(p, face)) {
        std::vector<int> t(h.begin(), h.end());
        int sum = 0;
        for (int i = 0; i < k; ++i) {
            t[static_cast<std::size_t>(i)] += a.dbg[static_cast<std::size_t>(i)];
            sum += a.dbg[static_cast<std::size_t>(i)];
        }
        int m = *std::min_element(t.begin(), t.end());
        for (int& v : t) v -= m;
        out.emplace_back(std::move(t), a.prob * std::pow(alpha, a.dlevel) * std::pow(p.rho(), -sum));
    }
    return out;
}

/// Foster check of f on the twisted chain over the box max h ≤ box_bound.
inline QuadraticCertificate certify_quadratic(const QueueParams& p, int box_bound, double epsilon = 0.1,
                                              bool keep_states = false) {
    if (!p.stable()) throw UnstableSystem("the quadratic certificate needs rho < 1");
    if (!(epsilon > 0)) throw InvalidParameter("epsilon must be positive");
    const int k = p.k();
    const double gap = p.mu_total() - p.lambda();
    QuadraticCertificate c;
    c.epsilon = epsilon;
    c.box_bound = box_bound;
    c.F_threshold = (k - 1 + epsilon) / (2 * gap);
    auto idx = BackgroundIndex::enumerate(k, box_bound);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        auto h = idx.state(b);
        QuadraticStateCheck s;
        s.h.assign(h.begin(), h.end());
        const double f = quadratic_potential(h);
        double total = 0.0, weighted = 0.0;
        for (int i = 0; i < k; ++i) {
            total += h[static_cast<std::size_t>(i)];
            weighted += p.mu(i) * h[static_cast<std::size_t>(i)];
        }
        for (const auto& [t, w] : twisted_row(p, h)) s.expected_next += w * quadratic_potential(t);
        s.bound = f - gap * total + 0.5 * (k - 1);
        s.closed_form = s.bound - k * p.rho() * weighted;
        s.in_F = total <= c.F_threshold;
        c.closed_form_error = std::max(c.closed_form_error, std::abs(s.expected_next - s.closed_form));
        c.bound_excess = std::max(c.bound_excess, s.expected_next - s.bound);
        if (s.in_F)
            ++c.F_size;
        else
            c.max_violation = std::max(c.max_violation, s.expected_next - f);
        if (keep_states) c.states.push_back(std::move(s));
    }
    c.states_checked = idx.size();
    if (c.bound_excess > 1e-10) throw InternalConsistency("twisted-chain drift exceeds its closed-form bound");
    c.margin = -c.max_violation;
    c.holds = c.max_violation <= -epsilon;
    return c;
}

/// One transition of the queue-length chain: arrivals join a shortest queue
/// (split by weight on ties), services at an empty queue are self-loops.
inline std::vector<std::pair<std::vector<int>, double>> queue_length_row(const QueueParams& p, std::span<const int> u) {
    const int k = p.k();
    int m = *std::min_element(u.begin(), u.end());
    std::uint32_t U = 0;
    for (int i = 0; i < k; ++i)
        if (u[static_cast<std::size_t>(i)] == m) U |= 1u << i;
    std::vector<std::pair<std::vector<int>, double>> out;
    for (int i = 0; i < k; ++i) {
        if (!(U & (1u << i))) continue;
        std::vector<int> v(u.begin(), u.end());
        ++v[static_cast<std::size_t>(i)];
        out.emplace_back(std::move(v), p.rates().arrival_share(U, i));
    }
    for (int j = 0; j < k; ++j) {
        std::vector<int> v(u.begin(), u.end());
        if (v[static_cast<std::size_t>(j)] > 0) --v[static_cast<std::size_t>(j)];
        out.emplace_back(std::move(v), p.mu(j));
    }
    return out;
}

inline double exponential_potential(double alpha, std::span<const int> u) {
    double r = 0.0;
    for (int v : u) r += static_cast<double>(v) * v;
    return std::exp(alpha * std::sqrt(r));
}

/// Closed-form drift-ratio bounds for Σu > β, at step sizes s = α/(2√β), a = α/√k.
struct DriftBracket {
    double d1 = 0.0;
    double d2 = 0.0;
    double max() const { return std::max(d1, d2); }
};

inline DriftBracket exponential_bracket(const QueueParams& p, double alpha, double delta, double beta) {
    const double s = std::isinf(beta) ? 0.0 : alpha / (2 * std::sqrt(beta));
    const double a = alpha / std::sqrt(static_cast<double>(p.k()));
    const double lam = p.lambda(), mu = p.mu_total();
    double mu_min = p.mu(0);
    for (int i = 1; i < p.k(); ++i) mu_min = std::min(mu_min, p.mu(i));
    DriftBracket b;
    b.d1 = lam * (std::exp(s + delta) - 1) + (std::exp(s) - 1) * mu - mu_min * std::exp(s) * (1 - std::exp(-a));
    b.d2 = (std::exp(s) - 1) * (lam * std::exp(a) + mu) + (std::exp(delta) - 1) * (lam - mu * std::exp(-a));
    return b;
}

struct ExponentialCertificate {
    double alpha = 0.0;
    double delta = 0.0;
    int box_bound = 0;
    std::size_t states_checked = 0;
    /// smallest integer β ≥ k with a negative worst drift ratio on Σu > β in the box
    double beta = 0.0;
    /// c₁ = −max drift ratio over box states with Σu > β
    double c1 = 0.0;
    double max_violation = 0.0;
    /// bracket at the measured β; the measured worst ratio on Σu > b is
    /// checked against the bracket at b = β, 2β, 4β, ... inside the box
    DriftBracket bracket_at_beta;
    bool bracket_holds = false;
    int bracket_checks = 0;
    /// smallest β with max(d₁, d₂) at most half its β → ∞ limit; beyond it the
    /// closed form alone gives drift ≤ −c f
    double beta_closed_form = 0.0;
    double c1_closed_form = 0.0;
    /// η̄₁⁽⁰⁾ = α/√k
    double tightness_bar = 0.0;
};

inline ExponentialCertificate certify_exponential(const QueueParams& p, double alpha, int box_bound) {
    if (!p.stable()) throw UnstableSystem("the exponential certificate needs rho < 1");
    const int k = p.k();
    const double amax = std::sqrt(static_cast<double>(k)) * std::log(1.0 / p.rho());
    if (!(alpha > 0 && alpha < amax)) throw InvalidParameter("alpha must lie in (0, sqrt(k) log(1/rho))");
    if (box_bound < 1) throw InvalidParameter("box bound must be at least 1");
    ExponentialCertificate c;
    c.alpha = alpha;
    c.box_bound = box_bound;
    c.tightness_bar = alpha / std::sqrt(static_cast<double>(k));

    // worst ratio per total Σu over the box, u ≠ 0
    const int max_total = k * box_bound;
    std::vector<double> worst(static_cast<std::size_t>(max_total + 1), -std::numeric_limits<double>::infinity());
    std::vector<int> u(static_cast<std::size_t>(k), 0);
    std::size_t count = 0;
    while (true) {
        int total = 0;
        for (int v : u) total += v;
        if (total > 0) {
            double f = exponential_potential(alpha, u);
            double e = 0.0;
            for (const auto& [v, w] : queue_length_row(p, u)) e += w * exponential_potential(alpha, v);
            double& slot = worst[static_cast<std::size_t>(total)];
            slot = std::max(slot, e / f - 1.0);
        }
        ++count;
        int i = 0;
        while (i < k && u[static_cast<std::size_t>(i)] == box_bound) u[static_cast<std::size_t>(i++)] = 0;
        if (i == k) break;
        ++u[static_cast<std::size_t>(i)];
    }
    c.states_checked = count;
    // suffix maxima: tail[t] = max ratio over Σu ≥ t
    std::vector<double> tail(worst.size() + 1, -std::numeric_limits<double>::infinity());
    for (int t = max_total; t >= 0; --t)
        tail[static_cast<std::size_t>(t)] = std::max(tail[static_cast<std::size_t>(t + 1)], worst[static_cast<std::size_t>(t)]);
    int beta = -1;
    for (int b = k; b < max_total; ++b)
        if (tail[static_cast<std::size_t>(b + 1)] < 0) {
            beta = b;
            break;
        }
    if (beta < 0) throw CertificationFailure("no beta with negative drift found in the box; enlarge it or shrink alpha");
    c.beta = beta;
    c.max_violation = tail[static_cast<std::size_t>(beta + 1)];
    c.c1 = -c.max_violation;

    double best = -std::numeric_limits<double>::infinity();
    for (double d : {0.01, 0.02, 0.05, 0.1}) {
        double m = -exponential_bracket(p, alpha, d, std::numeric_limits<double>::infinity()).max();
        if (m > best) best = m, c.delta = d;
    }
    c.bracket_at_beta = exponential_bracket(p, alpha, c.delta, c.beta);
    c.bracket_holds = true;
    for (int b = beta; b < max_total; b *= 2) {
        bool ok = tail[static_cast<std::size_t>(b + 1)] <= exponential_bracket(p, alpha, c.delta, b).max() + 1e-12;
        c.bracket_holds = c.bracket_holds && ok;
        ++c.bracket_checks;
    }
    if (best > 0) {
        const double target = -0.5 * best;
        double lo = 1.0, hi = 2.0;
        while (exponential_bracket(p, alpha, c.delta, hi).max() > target) {
            lo = hi;
            hi *= 2;
            if (hi > 1e15) break;
        }
        for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (exponential_bracket(p, alpha, c.delta, mid).max() > target ? lo : hi) = mid;
        }
        c.beta_closed_form = hi;
        c.c1_closed_form = -exponential_bracket(p, alpha, c.delta, hi).max();
    } else {
        c.beta_closed_form = std::numeric_limits<double>::infinity();
    }
    return c;
}

/// E exp(a Σ Lᵢ) under a truncated stationary law, Σ Lᵢ = kM + h·1.
inline double tightness_moment(const StationaryDist& d, const BackgroundIndex& idx, double a) {
    double s = 0.0;
    for (int n = 0; n <= d.L_max; ++n)
        for (std::size_t b = 0; b < idx.size(); ++b) s += d.at(n, b) * std::exp(a * (idx.k() * n + idx.total(b)));
    return s;
}

} // namespace jsq
