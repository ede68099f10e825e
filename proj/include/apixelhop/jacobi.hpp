#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "error.hpp"

namespace apixelhop {

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
/// `vectors` is row-major n x n; row i is the unit eigenvector for values[i].
struct SymmetricEigen {
    std::size_t n = 0;
    std::vector<double> values;
    std::vector<double> vectors;
    int sweeps = 0;

    std::span<const double> vector(std::size_t i) const { return {vectors.data() + i * n, n}; }
};

/// Cyclic Jacobi rotations on a dense symmetric matrix (row-major n x n).
/// Stops when the off-diagonal Frobenius norm falls below tol * ||A||_F.
inline SymmetricEigen jacobi_eigen(std::span<const double> matrix, std::size_t n, double tol = 1e-12,
                                   int max_sweeps = 100) {
    require(matrix.size() == n * n, Errc::DimensionMismatch, "jacobi_eigen: matrix is not n x n");
    std::vector<double> a(matrix.begin(), matrix.end());
    std::vector<double> v(n * n, 0.0); // columns are eigenvectors
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    auto A = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };

    double total = 0.0;
    for (double x : a) total += x * x;
    const double threshold = tol * std::sqrt(total);

    int sweep = 0;
    for (; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += 2.0 * A(p, q) * A(p, q);
        if (std::sqrt(off) <= threshold) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (apq == 0.0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = A(k, p);
                    const double akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = A(p, k);
                    const double aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p];
                    const double vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return A(i, i) > A(j, j); });

    SymmetricEigen out;
    out.n = n;
    out.sweeps = sweep;
    out.values.resize(n);
    out.vectors.resize(n * n);
    for (std::size_t r = 0; r < n; ++r) {
        out.values[r] = A(order[r], order[r]);
        for (std::size_t k = 0; k < n; ++k) out.vectors[r * n + k] = v[k * n + order[r]];
    }
    return out;
}

} // namespace apixelhop
