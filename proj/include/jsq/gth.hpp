#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "jsq/errors.hpp"
#include "jsq/kernel.hpp"

namespace jsq {

/// Stationary row vector of a finite stochastic matrix by the
/// Grassmann-Taksar-Heyman state reduction. Diagonal entries are never used,
/// so rows need not sum to one exactly; only the off-diagonal pattern matters.
inline Eigen::VectorXd gth_dense(Eigen::MatrixXd P) {
    const Eigen::Index n = P.rows();
    if (n == 0 || P.cols() != n) throw InvalidParameter("GTH needs a non-empty square matrix");
    std::vector<double> pivot(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index m = n - 1; m > 0; --m) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) s += P(m, j);
        if (!(s > 0)) throw NumericError("GTH pivot vanished: chain is not unichain");
        pivot[static_cast<std::size_t>(m)] = s;
        for (Eigen::Index i = 0; i < m; ++i) {
            double f = P(i, m);
            if (f == 0.0) continue;
            f /= s;
            for (Eigen::Index j = 0; j < m; ++j) P(i, j) += f * P(m, j);
        }
    }
    Eigen::VectorXd pi(n);
    pi(0) = 1.0;
    for (Eigen::Index m = 1; m < n; ++m) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) acc += pi(i) * P(i, m);
        pi(m) = acc / pivot[static_cast<std::size_t>(m)];
    }
    return pi / pi.sum();
}

/// GTH on a kernel stored as a band of half-width b (|i - j| ≤ b); the
/// reduction creates no fill outside the band. Cost O(n b²).
inline std::vector<double> gth_banded(const TransitionKernel& K) {
    const std::size_t n = K.size();
    if (n == 0) throw InvalidParameter("empty kernel");
    const std::size_t b = K.bandwidth();
    const std::size_t w = 2 * b + 1;
    // band(i, j) stored at i * w + (j - i + b)
    std::vector<double> band(n * w, 0.0);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return band[i * w + (j + b - i)]; };
    for (std::size_t s = 0; s < n; ++s)
        for (const auto& e : K.row(s)) at(s, e.col) += e.prob;

    std::vector<double> pivot(n, 0.0);
    for (std::size_t m = n - 1; m > 0; --m) {
        const std::size_t lo = m > b ? m - b : 0;
        double s = 0.0;
        for (std::size_t j = lo; j < m; ++j) s += at(m, j);
        if (!(s > 0)) throw NumericError("GTH pivot vanished: chain is not unichain");
        pivot[m] = s;
        const double* row_m = &at(m, lo);
        for (std::size_t i = lo; i < m; ++i) {
            double f = at(i, m);
            if (f == 0.0) continue;
            f /= s;
            double* row_i = &at(i, lo);
            for (std::size_t j = 0; j < m - lo; ++j) row_i[j] += f * row_m[j];
        }
    }
    std::vector<double> pi(n, 0.0);
    pi[0] = 1.0;
    double total = 1.0;
    for (std::size_t m = 1; m < n; ++m) {
        const std::size_t lo = m > b ? m - b : 0;
        double acc = 0.0;
        for (std::size_t i = lo; i < m; ++i) acc += pi[i] * at(i, m);
        pi[m] = acc / pivot[m];
        total += pi[m];
    }
    for (double& v : pi) v /= total;
    return pi;
}

} // namespace jsq
