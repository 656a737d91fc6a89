#pragma once

// Independent reference computations for the unit and acceptance tests.
// They deliberately avoid the library's own builders.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace oracle {

/// All h ∈ {0..D}^k with a zero entry, by nested counting.
inline std::vector<std::vector<int>> brute_force_H(int k, int D) {
    std::vector<std::vector<int>> out;
    std::vector<int> h(static_cast<std::size_t>(k), 0);
    while (true) {
        if (*std::min_element(h.begin(), h.end()) == 0) out.push_back(h);
        int pos = k - 1;
        while (pos >= 0 && h[static_cast<std::size_t>(pos)] == D) h[static_cast<std::size_t>(pos--)] = 0;
        if (pos < 0) break;
        ++h[static_cast<std::size_t>(pos)];
    }
    return out;
}

/// One-step law of the original queue-length chain L at u, as (target, mass)
/// pairs in event order: arrivals to each shortest queue ascending, then
/// services by queue index. Service at an empty queue leaves u unchanged.
inline std::vector<std::pair<std::vector<int>, double>> l_chain_row(const std::vector<int>& u, double lambda,
                                                                    const std::vector<double>& mu) {
    std::vector<std::pair<std::vector<int>, double>> out;
    int m = *std::min_element(u.begin(), u.end());
    int ties = static_cast<int>(std::count(u.begin(), u.end(), m));
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] != m) continue;
        auto v = u;
        ++v[i];
        out.emplace_back(v, ties == 1 ? lambda : lambda / ties);
    }
    for (std::size_t j = 0; j < u.size(); ++j) {
        auto v = u;
        if (v[j] > 0) --v[j];
        out.emplace_back(v, mu[j]);
    }
    return out;
}

/// Roots of a t² + b t + c = 0, ascending; empty if complex.
inline std::vector<double> quadratic_roots(double a, double b, double c) {
    double disc = b * b - 4 * a * c;
    if (disc < 0) return {};
    double s = std::sqrt(disc);
    double q = -0.5 * (b + (b >= 0 ? s : -s));
    std::vector<double> r{q / a, c / q};
    std::sort(r.begin(), r.end());
    return r;
}

/// Stationary vector by a dense LU solve of π(P − I) = 0 with Σπ = 1
/// replacing the last equation.
inline Eigen::VectorXd stationary_lu(const Eigen::MatrixXd& P) {
    const Eigen::Index n = P.rows();
    Eigen::MatrixXd A = (P - Eigen::MatrixXd::Identity(n, n)).transpose();
    A.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    return A.fullPivLu().solve(rhs);
}

inline double spectral_radius_eigen(const Eigen::MatrixXd& M) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace oracle
