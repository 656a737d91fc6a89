#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/gth.hpp"
#include "jsq/kernel.hpp"
#include "jsq/statespace.hpp"

namespace jsq {

/// Probability mass over {0..L_max} × H_D, level-major.
struct StationaryDist {
    std::vector<double> pi;
    int L_max = 0;
    std::size_t bg_size = 0;
    /// ‖πP − π‖∞ against the kernel it was computed from
    double residual = 0.0;
    std::size_t iterations = 0;

    double at(int level, std::size_t bg) const { return pi[static_cast<std::size_t>(level) * bg_size + bg]; }
    std::span<const double> slice(int level) const {
        return {pi.data() + static_cast<std::size_t>(level) * bg_size, bg_size};
    }
    /// P(M = n), n = 0..L_max
    std::vector<double> level_marginal() const {
        std::vector<double> out(static_cast<std::size_t>(L_max + 1), 0.0);
        for (int n = 0; n <= L_max; ++n)
            for (double v : slice(n)) out[static_cast<std::size_t>(n)] += v;
        return out;
    }
    double total() const {
        double s = 0.0;
        for (double v : pi) s += v;
        return s;
    }
};

inline double balance_residual(const TransitionKernel& K, std::span<const double> pi) {
    std::vector<double> next(pi.size());
    K.left_multiply(pi, next);
    double worst = 0.0;
    for (std::size_t i = 0; i < pi.size(); ++i) worst = std::max(worst, std::abs(next[i] - pi[i]));
    return worst;
}

inline StationaryDist make_dist(const TransitionKernel& K, std::vector<double> pi) {
    StationaryDist d;
    d.pi = std::move(pi);
    d.L_max = K.max_level();
    d.bg_size = K.bg_size();
    d.residual = balance_residual(K, d.pi);
    return d;
}

inline StationaryDist solve_direct(const TransitionKernel& K) { return make_dist(K, gth_banded(K)); }

/// Power iteration from the uniform vector, stopping when successive
/// iterates differ by at most tol in ℓ₁.
inline StationaryDist solve_power(const TransitionKernel& K, double tol, std::size_t max_iters) {
    const std::size_t n = K.size();
    std::vector<double> x(n, 1.0 / static_cast<double>(n)), y(n);
    double diff = 0.0;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        K.left_multiply(x, y);
        double total = 0.0;
        for (double v : y) total += v;
        diff = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            y[i] /= total;
            diff += std::abs(y[i] - x[i]);
        }
        x.swap(y);
        if (diff <= tol) {
            auto d = make_dist(K, std::move(x));
            d.iterations = it;
            return d;
        }
    }
    throw ConvergenceFailure("power iteration did not reach the requested tolerance", diff, max_iters);
}

/// Occupation frequencies of one seeded sample path started at (0, 0).
inline StationaryDist simulate(const Sampler& sampler, std::uint64_t seed, std::uint64_t steps, std::uint64_t burn_in) {
    if (steps <= burn_in) throw InvalidParameter("steps must exceed burn_in");
    const std::size_t H = sampler.bg_size();
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(sampler.max_level() + 1) * H, 0);
    std::mt19937_64 gen(seed);
    WalkState z{0, 0};
    for (std::uint64_t t = 0; t < steps; ++t) {
        // 53 random bits give a uniform variate on [0, 1)
        double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
        z = sampler.step(z, u);
        if (t >= burn_in) ++counts[static_cast<std::size_t>(z.level) * H + z.bg];
    }
    StationaryDist d;
    d.L_max = sampler.max_level();
    d.bg_size = H;
    d.iterations = steps;
    const double kept = static_cast<double>(steps - burn_in);
    d.pi.reserve(counts.size());
    for (auto c : counts) d.pi.push_back(static_cast<double>(c) / kept);
    return d;
}

inline StationaryDist simulate(const Sampler& sampler, std::uint64_t seed, std::uint64_t steps) {
    return simulate(sampler, seed, steps, steps / 10);
}

/// Independent replications with seeds seed, seed+1, ...; merged by seed
/// order with equal weights.
inline StationaryDist simulate_replications(const Sampler& sampler, std::uint64_t seed, std::uint64_t steps,
                                            int replications) {
    if (replications < 1) throw InvalidParameter("need at least one replication");
    StationaryDist merged = simulate(sampler, seed, steps);
    for (int r = 1; r < replications; ++r) {
        auto d = simulate(sampler, seed + static_cast<std::uint64_t>(r), steps);
        for (std::size_t i = 0; i < merged.pi.size(); ++i) merged.pi[i] += d.pi[i];
    }
    for (double& v : merged.pi) v /= replications;
    merged.iterations = steps * static_cast<std::uint64_t>(replications);
    return merged;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidParameter("distributions live on different spaces");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

inline double tv_distance(std::span<const double> a, std::span<const double> b) { return 0.5 * l1_distance(a, b); }

/// CSV with columns level,h1..hk,probability
inline void write_pi_csv(std::ostream& os, const StationaryDist& d, const BackgroundIndex& idx) {
    os << "level";
    for (int i = 1; i <= idx.k(); ++i) os << ",h" << i;
    os << ",probability\n";
    char buf[64];
    for (int n = 0; n <= d.L_max; ++n) {
        for (std::size_t b = 0; b < d.bg_size; ++b) {
            os << n;
            for (int v : idx.state(b)) os << ',' << v;
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d.at(n, b), std::chars_format::general, 17);
            (void)ec;
            os << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
        }
    }
}

} // namespace jsq
