#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/model.hpp"

namespace jsq {

/// Queue-length differences from the minimum; a member of H when at least
/// one entry is zero.
using Background = std::vector<int>;

/// Boundary face: U = {i : hᵢ = 0} (bit i set) and whether the minimum
/// queue length is zero.
struct FaceLabel {
    std::uint32_t mask = 0;
    bool zero_level = false;

    int size() const { return std::popcount(mask); }
    bool contains(int i) const { return (mask >> i) & 1u; }
    bool operator==(const FaceLabel&) const = default;
};

inline FaceLabel face_of(std::span<const int> h, bool zero_level = false) {
    FaceLabel f;
    f.zero_level = zero_level;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] < 0) throw InvalidState("background entries must be non-negative");
        if (h[i] == 0) f.mask |= 1u << i;
    }
    if (f.mask == 0) throw InvalidState("background vector has no zero entry (min h != 0)");
    return f;
}

/// Index list of the queues in U, ascending.
inline std::vector<int> face_members(std::uint32_t mask, int k) {
    std::vector<int> out;
    for (int i = 0; i < k; ++i)
        if (mask & (1u << i)) out.push_back(i);
    return out;
}

/// Every non-empty U ⊆ {0..k-1} as a bit mask, in increasing mask order.
inline std::vector<std::uint32_t> all_faces(int k) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t m = 1; m < (1u << k); ++m) out.push_back(m);
    return out;
}

inline constexpr std::size_t kDefaultTableCap = std::size_t{1} << 24;

/// Dense bijection between the truncated background space
/// H_D = {h ∈ Z₊ᵏ : min h = 0, max h ≤ D} and [0, |H_D|), in lexicographic
/// order of h.
class BackgroundIndex {
public:
    static BackgroundIndex enumerate(int k, int D, std::size_t table_cap = kDefaultTableCap) {
        if (k < 2 || k > kMaxQueues) throw InvalidParameter("k must lie in [2, 16]");
        if (D < 1) throw InvalidParameter("truncation bound D must be at least 1");
        std::size_t table = 1;
        for (int i = 0; i < k; ++i) {
            if (table > table_cap / static_cast<std::size_t>(D + 1))
                throw SizeLimitExceeded("(D+1)^k = " + std::to_string(D + 1) + "^" + std::to_string(k) +
                                        " exceeds the table cap");
            table *= static_cast<std::size_t>(D + 1);
        }

        BackgroundIndex idx;
        idx.k_ = k;
        idx.D_ = D;
        idx.code_to_index_.assign(table, -1);
        Background h(static_cast<std::size_t>(k), 0);
        for (std::size_t code = 0; code < table; ++code) {
            // code is the base-(D+1) number with h[0] most significant.
            std::size_t rest = code;
            for (int i = k - 1; i >= 0; --i) {
                h[static_cast<std::size_t>(i)] = static_cast<int>(rest % static_cast<std::size_t>(D + 1));
                rest /= static_cast<std::size_t>(D + 1);
            }
            if (*std::min_element(h.begin(), h.end()) != 0) continue;
            idx.code_to_index_[code] = static_cast<std::int64_t>(idx.size());
            idx.states_.insert(idx.states_.end(), h.begin(), h.end());
            idx.masks_.push_back(face_of(h).mask);
        }
        idx.interior_.resize(idx.size());
        for (std::size_t s = 0; s < idx.size(); ++s) idx.interior_[s] = idx.neighborhood_inside(s);
        return idx;
    }

    int k() const { return k_; }
    int bound() const { return D_; }
    std::size_t size() const { return masks_.size(); }

    std::span<const int> state(std::size_t i) const {
        return {states_.data() + i * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_)};
    }
    std::uint32_t face_mask(std::size_t i) const { return masks_[i]; }
    FaceLabel face(std::size_t i, bool zero_level = false) const { return {masks_[i], zero_level}; }
    /// h·1
    int total(std::size_t i) const {
        auto h = state(i);
        return std::accumulate(h.begin(), h.end(), 0);
    }
    /// True when every background jump available at a positive level stays
    /// inside H_D.
    bool interior(std::size_t i) const { return interior_[i]; }

    std::optional<std::size_t> find(std::span<const int> h) const {
        if (h.size() != static_cast<std::size_t>(k_)) return std::nullopt;
        std::size_t code = 0;
        bool has_zero = false;
        for (int v : h) {
            if (v < 0 || v > D_) return std::nullopt;
            has_zero |= v == 0;
            code = code * static_cast<std::size_t>(D_ + 1) + static_cast<std::size_t>(v);
        }
        if (!has_zero) return std::nullopt;
        return static_cast<std::size_t>(code_to_index_[code]);
    }

    std::size_t index_of(std::span<const int> h) const {
        auto i = find(h);
        if (!i) throw InvalidState("vector is not in the truncated background space");
        return *i;
    }

    std::string label(std::size_t i) const {
        std::string s = "(";
        auto h = state(i);
        for (std::size_t j = 0; j < h.size(); ++j) {
            if (j) s += ',';
            s += std::to_string(h[j]);
        }
        return s + ")";
    }

private:
    bool neighborhood_inside(std::size_t s) const {
        auto h = state(s);
        std::uint32_t m = masks_[s];
        // Only the shortest-queue service h + 1 - eᵢ can grow an entry.
        for (int i = 0; i < k_; ++i) {
            if (!(m & (1u << i))) continue;
            for (int j = 0; j < k_; ++j)
                if (j != i && h[static_cast<std::size_t>(j)] + 1 > D_) return false;
        }
        return true;
    }

    int k_ = 0;
    int D_ = 0;
    std::vector<int> states_;
    std::vector<std::uint32_t> masks_;
    std::vector<bool> interior_;
    std::vector<std::int64_t> code_to_index_;
};

} // namespace jsq
