#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbe::linalg {

// In-place Cholesky factorization of a symmetric positive-definite matrix
// (row-major, lower triangle used); throws on a non-positive pivot.
inline void cholesky(std::vector<double>& a, std::size_t m) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * m + j];
            for (std::size_t t = 0; t < j; ++t) sum -= a[i * m + t] * a[j * m + t];
            if (i == j) {
                if (!(sum > 0.0))
                    throw std::runtime_error("matrix is singular (pivot " + std::to_string(sum) +
                                             " at dimension " + std::to_string(i) + ")");
                a[i * m + i] = std::sqrt(sum);
            } else {
                a[i * m + j] = sum / a[j * m + j];
            }
        }
    }
}

// Forward substitution L y = x, overwriting x with y.
inline void solve_lower(const std::vector<double>& chol, std::size_t m, std::vector<double>& x) {
    for (std::size_t i = 0; i < m; ++i) {
        double sum = x[i];
        for (std::size_t t = 0; t < i; ++t) sum -= chol[i * m + t] * x[t];
        x[i] = sum / chol[i * m + i];
    }
}

// Backward substitution L^T y = x, overwriting x with y.
inline void solve_upper_t(const std::vector<double>& chol, std::size_t m, std::vector<double>& x) {
    for (std::size_t ii = m; ii-- > 0;) {
        double sum = x[ii];
        for (std::size_t t = ii + 1; t < m; ++t) sum -= chol[t * m + ii] * x[t];
        x[ii] = sum / chol[ii * m + ii];
    }
}

}  // namespace fbe::linalg
