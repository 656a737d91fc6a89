#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/model.hpp"
#include "jsq/statespace.hpp"

namespace jsq {

/// One atom of an increment law: level jump, background jump, mass.
template <class Scalar = double>
struct Increment {
    int dlevel = 0;
    std::vector<int> dbg;
    Scalar prob{};
};

/// Support and masses of the one-step increment on face U (positive level)
/// or U at level zero. Ordering is fixed: arrivals to i ∈ U ascending, then
/// services by queue index. Atoms with equal jumps are not merged.
template <class Scalar>
std::vector<Increment<Scalar>> increment_law(const Rates<Scalar>& rates, FaceLabel face) {
    const int k = rates.k();
    if (face.mask == 0) throw InvalidState("face has an empty set of shortest queues");
    if (face.mask >> k) throw InvalidState("face refers to a queue index >= k");
    const bool single = face.size() == 1;

    std::vector<Increment<Scalar>> law;
    for (int i = 0; i < k; ++i) {
        if (!face.contains(i)) continue;
        Increment<Scalar> a;
        a.dbg.assign(static_cast<std::size_t>(k), 0);
        if (single) {
            // the unique shortest queue overtakes nobody: min rises by one
            a.dlevel = 1;
            for (int j = 0; j < k; ++j) a.dbg[static_cast<std::size_t>(j)] = j == i ? 0 : -1;
            a.prob = rates.lambda;
        } else {
            a.dbg[static_cast<std::size_t>(i)] = 1;
            a.prob = rates.arrival_share(face.mask, i);
        }
        law.push_back(std::move(a));
    }
    for (int j = 0; j < k; ++j) {
        Increment<Scalar> s;
        s.dbg.assign(static_cast<std::size_t>(k), 0);
        s.prob = rates.mu[static_cast<std::size_t>(j)];
        if (!face.contains(j)) {
            s.dbg[static_cast<std::size_t>(j)] = -1;
        } else if (!face.zero_level) {
            s.dlevel = -1;
            for (int m = 0; m < k; ++m) s.dbg[static_cast<std::size_t>(m)] = m == j ? 0 : 1;
        }
        // zero level, j ∈ U: idle server, no movement
        law.push_back(std::move(s));
    }
    return law;
}

inline std::vector<Increment<double>> increment_law(const QueueParams& p, FaceLabel face) {
    return increment_law(p.rates(), face);
}

/// Background index reached from `from` by `dbg`, or nothing if it leaves H_D.
inline std::optional<std::size_t> shifted(const BackgroundIndex& idx, std::size_t from, std::span<const int> dbg) {
    auto h = idx.state(from);
    int buf[kMaxQueues];
    for (std::size_t i = 0; i < h.size(); ++i) buf[i] = h[i] + dbg[i];
    return idx.find(std::span<const int>(buf, h.size()));
}

struct WalkState {
    int level = 0;
    std::size_t bg = 0;
    bool operator==(const WalkState&) const = default;
};

/// Row-stochastic kernel on {0..L_max} × H_D in CSR form; state s is
/// level · |H_D| + background index.
class TransitionKernel {
public:
    struct Entry {
        std::size_t col;
        double prob;
    };

    /// Rows given as (col, prob) lists; duplicates are summed in input order.
    static TransitionKernel from_rows(int levels, std::size_t bg_size, const std::vector<std::vector<Entry>>& rows) {
        TransitionKernel K;
        K.levels_ = levels;
        K.bg_size_ = bg_size;
        K.offsets_.push_back(0);
        for (const auto& row : rows) {
            std::vector<Entry> merged;
            for (const auto& e : row) {
                auto it = std::find_if(merged.begin(), merged.end(), [&](const Entry& m) { return m.col == e.col; });
                if (it == merged.end())
                    merged.push_back(e);
                else
                    it->prob += e.prob;
            }
            std::sort(merged.begin(), merged.end(), [](const Entry& a, const Entry& b) { return a.col < b.col; });
            K.entries_.insert(K.entries_.end(), merged.begin(), merged.end());
            K.offsets_.push_back(K.entries_.size());
        }
        return K;
    }

    std::size_t size() const { return offsets_.size() - 1; }
    /// Number of levels, i.e. L_max + 1.
    int levels() const { return levels_; }
    int max_level() const { return levels_ - 1; }
    std::size_t bg_size() const { return bg_size_; }
    std::size_t state_index(WalkState z) const { return static_cast<std::size_t>(z.level) * bg_size_ + z.bg; }
    WalkState state_of(std::size_t s) const { return {static_cast<int>(s / bg_size_), s % bg_size_}; }

    std::span<const Entry> row(std::size_t s) const {
        return {entries_.data() + offsets_[s], offsets_[s + 1] - offsets_[s]};
    }
    double at(std::size_t s, std::size_t t) const {
        for (const auto& e : row(s))
            if (e.col == t) return e.prob;
        return 0.0;
    }
    std::size_t nonzeros() const { return entries_.size(); }

    /// max |row i - col j| over stored entries
    std::size_t bandwidth() const {
        std::size_t b = 0;
        for (std::size_t s = 0; s < size(); ++s)
            for (const auto& e : row(s)) b = std::max(b, e.col > s ? e.col - s : s - e.col);
        return b;
    }

    double max_row_sum_error() const {
        double worst = 0.0;
        for (std::size_t s = 0; s < size(); ++s) {
            double sum = 0.0;
            for (const auto& e : row(s)) sum += e.prob;
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        return worst;
    }

    /// y = x P
    void left_multiply(std::span<const double> x, std::span<double> y) const {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t s = 0; s < size(); ++s) {
            if (x[s] == 0.0) continue;
            for (const auto& e : row(s)) y[e.col] += x[s] * e.prob;
        }
    }

private:
    int levels_ = 0;
    std::size_t bg_size_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<Entry> entries_;
};

/// Kernel of the reflecting walk (M, Y) truncated to levels ≤ L_max and
/// backgrounds in H_D. Moves leaving the box stay put.
inline TransitionKernel build_kernel(const QueueParams& p, const BackgroundIndex& idx, int L_max) {
    if (L_max < 0) throw InvalidParameter("L_max must be non-negative");
    if (idx.k() != p.k()) throw InvalidParameter("background index and parameters disagree on k");
    const std::size_t H = idx.size();
    const std::size_t n = static_cast<std::size_t>(L_max + 1) * H;
    std::vector<std::vector<TransitionKernel::Entry>> rows(n);

    std::vector<std::vector<Increment<double>>> law_pos(H), law_zero(H);
    for (std::size_t b = 0; b < H; ++b) {
        law_pos[b] = increment_law(p, idx.face(b, false));
        law_zero[b] = increment_law(p, idx.face(b, true));
    }
    for (int level = 0; level <= L_max; ++level) {
        for (std::size_t b = 0; b < H; ++b) {
            std::size_t s = static_cast<std::size_t>(level) * H + b;
            auto& row = rows[s];
            for (const auto& inc : level == 0 ? law_zero[b] : law_pos[b]) {
                int target_level = level + inc.dlevel;
                auto target_bg = shifted(idx, b, inc.dbg);
                std::size_t t = s;
                if (target_level <= L_max && target_bg)
                    t = static_cast<std::size_t>(target_level) * H + *target_bg;
                row.push_back({t, inc.prob});
            }
        }
    }
    return TransitionKernel::from_rows(L_max + 1, H, rows);
}

/// Inverse-CDF sampler over the unmerged increment laws, with the same
/// redirection rule as build_kernel.
class Sampler {
public:
    Sampler(const QueueParams& p, const BackgroundIndex& idx, int L_max) : L_max_(L_max), H_(idx.size()) {
        if (L_max < 0) throw InvalidParameter("L_max must be non-negative");
        for (int zero = 0; zero < 2; ++zero) {
            auto& table = zero ? zero_ : positive_;
            table.resize(H_);
            for (std::size_t b = 0; b < H_; ++b) {
                double cum = 0.0;
                for (const auto& inc : increment_law(p, idx.face(b, zero == 1))) {
                    cum += inc.prob;
                    auto t = shifted(idx, b, inc.dbg);
                    table[b].push_back({cum, inc.dlevel, t ? static_cast<std::int64_t>(*t) : -1});
                }
            }
        }
    }

    WalkState step(WalkState z, double u) const {
        const auto& atoms = (z.level == 0 ? zero_ : positive_)[z.bg];
        std::size_t a = 0;
        while (a + 1 < atoms.size() && !(u < atoms[a].cum)) ++a;
        const Atom& x = atoms[a];
        int level = z.level + x.dlevel;
        if (x.target < 0 || level > L_max_) return z;
        return {level, static_cast<std::size_t>(x.target)};
    }

    int max_level() const { return L_max_; }
    std::size_t bg_size() const { return H_; }

private:
    struct Atom {
        double cum;
        int dlevel;
        std::int64_t target;
    };
    int L_max_;
    std::size_t H_;
    std::vector<std::vector<Atom>> positive_, zero_;
};

/// Sparse triplets "row col prob", one per line, 17 significant digits.
inline void write_triplets(std::ostream& os, const TransitionKernel& K) {
    char buf[64];
    for (std::size_t s = 0; s < K.size(); ++s) {
        for (const auto& e : K.row(s)) {
            auto [end, ec] = std::to_chars(buf, buf + sizeof buf, e.prob, std::chars_format::general, 17);
            (void)ec;
            os << s << ' ' << e.col << ' ' << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
        }
    }
}

/// "index level h" legend for the triplet file.
inline void write_state_legend(std::ostream& os, const TransitionKernel& K, const BackgroundIndex& idx) {
    for (std::size_t s = 0; s < K.size(); ++s) {
        auto z = K.state_of(s);
        os << s << ' ' << z.level << ' ' << idx.label(z.bg) << '\n';
    }
}

} // namespace jsq
