#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/rational.hpp"

namespace jsq {

inline constexpr int kMaxQueues = 16;

enum class StabilityPolicy { require, allow_unstable };

/// Transition masses of the uniformized chain in an arbitrary scalar type.
/// `split` holds positive tie-break weights: an arrival facing the set U of
/// shortest queues joins i ∈ U with probability split[i] / Σ_{j∈U} split[j].
template <class Scalar>
struct Rates {
    Scalar lambda;
    std::vector<Scalar> mu;
    std::vector<Scalar> split;

    int k() const { return static_cast<int>(mu.size()); }

    Scalar arrival_share(std::uint32_t face_mask, int i) const {
        Scalar weight_sum = 0;
        for (int j = 0; j < k(); ++j)
            if (face_mask & (1u << j)) weight_sum += split[j];
        return (lambda * split[i]) / weight_sum;
    }
};

/// Parameters of the k-queue JSQ system after uniformization, so that
/// λ + Σ μᵢ = 1 and every rate doubles as a one-step probability.
class QueueParams {
public:
    static QueueParams normalize(double lambda_raw, std::vector<double> mu_raw,
                                 StabilityPolicy policy = StabilityPolicy::require,
                                 std::vector<double> split = {}) {
        if (mu_raw.size() < 2) throw InvalidParameter("at least two queues are required");
        if (mu_raw.size() > static_cast<std::size_t>(kMaxQueues))
            throw InvalidParameter("at most " + std::to_string(kMaxQueues) + " queues are supported");
        if (!(lambda_raw > 0) || !std::isfinite(lambda_raw))
            throw InvalidParameter("arrival rate must be positive and finite");
        for (double m : mu_raw)
            if (!(m > 0) || !std::isfinite(m))
                throw InvalidParameter("service rates must be positive and finite");
        if (split.empty()) split.assign(mu_raw.size(), 1.0);
        if (split.size() != mu_raw.size())
            throw InvalidParameter("tie-break weight vector must have one entry per queue");
        for (double w : split)
            if (!(w > 0) || !std::isfinite(w))
                throw InvalidParameter("tie-break weights must be positive");

        QueueParams p;
        double mu_raw_sum = std::accumulate(mu_raw.begin(), mu_raw.end(), 0.0);
        p.raw_rho_ = lambda_raw / mu_raw_sum;
        double total = lambda_raw + mu_raw_sum;

        p.rates_.mu.resize(mu_raw.size());
        double mu_sum = 0.0;
        for (std::size_t i = 0; i < mu_raw.size(); ++i) {
            p.rates_.mu[i] = mu_raw[i] / total;
            mu_sum += p.rates_.mu[i];
        }
        // Absorb the rounding residue into λ; for Σμ ≥ 1/2 the subtraction is
        // exact, hence λ + Σμ == 1 and a second pass is the identity.
        p.rates_.lambda = 1.0 - mu_sum;
        p.rates_.split = std::move(split);
        p.mu_sum_ = mu_sum;
        p.rho_ = p.rates_.lambda / mu_sum;

        if (!(p.rates_.lambda > 0)) throw InvalidParameter("arrival rate vanished after normalization");
        if (policy == StabilityPolicy::require && !(p.rho_ < 1.0))
            throw UnstableSystem("traffic intensity rho = " + std::to_string(p.rho_) + " is not below 1");
        return p;
    }

    static QueueParams normalize(const QueueParams& p,
                                 StabilityPolicy policy = StabilityPolicy::allow_unstable) {
        return normalize(p.lambda(), p.rates_.mu, policy, p.rates_.split);
    }

    int k() const { return rates_.k(); }
    double lambda() const { return rates_.lambda; }
    std::span<const double> mu() const { return rates_.mu; }
    double mu(int i) const { return rates_.mu[static_cast<std::size_t>(i)]; }
    double mu_total() const { return mu_sum_; }
    double rho() const { return rho_; }
    /// ρ computed from the rates as given, before scaling.
    double raw_rho() const { return raw_rho_; }
    bool stable() const { return rho_ < 1.0; }
    std::span<const double> split_weights() const { return rates_.split; }
    const Rates<double>& rates() const { return rates_; }

    /// ρᵏ, the decay rate of P(M = n).
    double decay_target() const { return std::pow(rho_, k()); }
    /// log ρ⁻ᵏ.
    double log_alpha() const { return -static_cast<double>(k()) * std::log(rho_); }

private:
    QueueParams() = default;
    Rates<double> rates_;
    double mu_sum_ = 0.0;
    double rho_ = 0.0;
    double raw_rho_ = 0.0;
};

inline bool check_stability(const QueueParams& p) { return p.rho() < 1.0; }

/// The same system with every rate read as the shortest decimal of its
/// double and renormalized exactly, so λ + Σμ = 1 holds in ℚ.
inline Rates<Rational> exact_rates(const QueueParams& p) {
    Rates<Rational> r;
    r.lambda = decimal_rational(p.lambda());
    Rational total = r.lambda;
    for (double m : p.mu()) {
        r.mu.push_back(decimal_rational(m));
        total += r.mu.back();
    }
    r.lambda /= total;
    for (auto& m : r.mu) m /= total;
    for (double w : p.split_weights()) r.split.push_back(decimal_rational(w));
    return r;
}

} // namespace jsq
