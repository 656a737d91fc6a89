#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/model.hpp"
#include "jsq/solver.hpp"
#include "jsq/statespace.hpp"

namespace jsq {

inline constexpr int kGuardBand = 5;
inline constexpr double kDisagreementAlarm = 1e-2;

struct DecayWindow {
    int N0 = 0;
    int N1 = 0;
};

/// Middle 40% of the levels, clipped to the guard bands.
inline DecayWindow default_window(int L_max) {
    DecayWindow w{static_cast<int>(std::lround(0.3 * L_max)), static_cast<int>(std::lround(0.7 * L_max))};
    w.N0 = std::max(w.N0, kGuardBand);
    w.N1 = std::min(w.N1, L_max - kGuardBand);
    return w;
}

inline void check_window(DecayWindow w, int L_max) {
    if (w.N0 < kGuardBand) throw InvalidParameter("decay window starts inside the lower guard band");
    if (w.N1 > L_max - kGuardBand) throw InvalidParameter("decay window ends inside the truncation guard band");
    if (w.N1 - w.N0 + 1 < 4) throw InvalidParameter("decay window holds fewer than 4 levels");
}

struct DecayReport {
    DecayWindow window;
    int L_max = 0;
    /// P(M = N₁)/P(M = N₁ − 1)
    double rate_ratio = 0.0;
    /// exp of the least-squares slope of log P(M = n) on the window
    double rate_regression = 0.0;
    double disagreement = 0.0;
    bool truncation_suspect = false;
    /// successive ratios P(M = n+1)/P(M = n), n = N₀..N₁−1
    std::vector<double> ratios;

    double error_against(double target) const {
        return std::max(std::abs(rate_ratio - target), std::abs(rate_regression - target));
    }
};

inline DecayReport estimate_decay(std::span<const double> marginal, DecayWindow w) {
    const int L_max = static_cast<int>(marginal.size()) - 1;
    check_window(w, L_max);
    DecayReport r;
    r.window = w;
    r.L_max = L_max;
    for (int n = w.N0; n <= w.N1; ++n)
        if (!(marginal[static_cast<std::size_t>(n)] > 0)) throw NumericError("non-positive level mass inside the decay window");
    for (int n = w.N0; n < w.N1; ++n)
        r.ratios.push_back(marginal[static_cast<std::size_t>(n + 1)] / marginal[static_cast<std::size_t>(n)]);
    r.rate_ratio = r.ratios.back();
    const double m = w.N1 - w.N0 + 1;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int n = w.N0; n <= w.N1; ++n) {
        double y = std::log(marginal[static_cast<std::size_t>(n)]);
        sx += n;
        sy += y;
        sxx += static_cast<double>(n) * n;
        sxy += n * y;
    }
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    r.rate_regression = std::exp(slope);
    r.disagreement = std::abs(r.rate_ratio - r.rate_regression);
    r.truncation_suspect = r.disagreement > kDisagreementAlarm;
    return r;
}

inline DecayReport estimate_decay(const StationaryDist& d, DecayWindow w) {
    auto m = d.level_marginal();
    return estimate_decay(std::span<const double>(m), w);
}

inline DecayReport estimate_decay(const StationaryDist& d) { return estimate_decay(d, default_window(d.L_max)); }

struct ScaledSliceTrace {
    std::vector<int> h;
    double c = 0.0;
    /// ρ^{−kn}[πₙ]ₕ for n = N₀..N₁
    std::vector<double> scaled;
    double relative_error = 0.0;
    /// |scaled[n+1] − scaled[n]| at the start and end of the window
    double first_step = 0.0;
    double last_step = 0.0;
};

struct GeometricCheck {
    DecayWindow window;
    int max_total = 0;
    double max_relative_error = 0.0;
    /// max over h of last_step / c_h; on a truncation this settles at the
    /// relative gap between the truncated decay rate and ρᵏ
    double max_relative_step = 0.0;
    std::vector<ScaledSliceTrace> traces;
};

/// Compares ρ^{−kn}[πₙ]ₕ with the QBD constants c_h for every h with
/// h·1 ≤ max_total; the relative error is taken at the window end.
inline GeometricCheck exact_geometric_check(const StationaryDist& d, const BackgroundIndex& idx, const QueueParams& p,
                                            std::span<const double> c, DecayWindow w, int max_total = 3) {
    check_window(w, d.L_max);
    if (c.size() != idx.size()) throw InvalidParameter("prefactor vector does not match the background index");
    GeometricCheck g;
    g.window = w;
    g.max_total = max_total;
    const double inv = 1.0 / p.decay_target();
    for (std::size_t b = 0; b < idx.size(); ++b) {
        if (idx.total(b) > max_total) continue;
        ScaledSliceTrace t;
        auto h = idx.state(b);
        t.h.assign(h.begin(), h.end());
        t.c = c[b];
        for (int n = w.N0; n <= w.N1; ++n) t.scaled.push_back(std::pow(inv, n) * d.at(n, b));
        t.relative_error = std::abs(t.scaled.back() - t.c) / std::abs(t.c);
        t.first_step = std::abs(t.scaled[1] - t.scaled[0]);
        t.last_step = std::abs(t.scaled.back() - t.scaled[t.scaled.size() - 2]);
        g.max_relative_step = std::max(g.max_relative_step, t.last_step / std::abs(t.c));
        g.max_relative_error = std::max(g.max_relative_error, t.relative_error);
        g.traces.push_back(std::move(t));
    }
    return g;
}

struct RoughBoundCheck {
    bool holds = false;
    /// min over the window of log ρᵏ + tolerance − (1/n) log P(M = n)
    double margin = 0.0;
    double tolerance = 0.0;
};

inline RoughBoundCheck rough_upper_bound_check(std::span<const double> marginal, const QueueParams& p, DecayWindow w,
                                               double tolerance = 0.02) {
    if (!p.stable()) throw UnstableSystem("the tail bound needs rho < 1");
    check_window(w, static_cast<int>(marginal.size()) - 1);
    RoughBoundCheck r;
    r.tolerance = tolerance;
    r.margin = std::numeric_limits<double>::infinity();
    const double target = std::log(p.decay_target());
    for (int n = w.N0; n <= w.N1; ++n)
        r.margin = std::min(r.margin, target + tolerance - std::log(marginal[static_cast<std::size_t>(n)]) / n);
    r.holds = r.margin >= 0;
    return r;
}

inline RoughBoundCheck rough_upper_bound_check(const StationaryDist& d, const QueueParams& p, DecayWindow w,
                                               double tolerance = 0.02) {
    auto m = d.level_marginal();
    return rough_upper_bound_check(std::span<const double>(m), p, w, tolerance);
}

/// Columns n, P(M = n), then ρ^{−kn}[πₙ]ₕ for every h with h·1 ≤ max_total.
inline void write_decay_csv(std::ostream& os, const StationaryDist& d, const BackgroundIndex& idx, const QueueParams& p,
                            int max_total = 2) {
    std::vector<std::size_t> cols;
    os << "n,p_level";
    for (std::size_t b = 0; b < idx.size(); ++b)
        if (idx.total(b) <= max_total) {
            cols.push_back(b);
            std::string l = idx.label(b);
            for (char& ch : l)
                if (ch == ',') ch = ' ';
            os << ",scaled" << l;
        }
    os << '\n';
    auto m = d.level_marginal();
    const double inv = 1.0 / p.decay_target();
    os.precision(17);
    for (int n = 0; n <= d.L_max; ++n) {
        os << n << ',' << m[static_cast<std::size_t>(n)];
        for (auto b : cols) os << ',' << std::pow(inv, n) * d.at(n, b);
        os << '\n';
    }
}

} // namespace jsq
