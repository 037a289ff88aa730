#pragma once

#include <vector>

#include "ratemb/tensor.hpp"

namespace ratemb::linalg {

struct EigenResult {
    /// Non-increasing.
    std::vector<double> values;
    /// Columns are unit eigenvectors, column j paired with values[j].
    Tensor vectors;
    /// Frobenius norm of the off-diagonal part when the sweeps stopped.
    double off_diagonal = 0.0;
    int sweeps = 0;
};

/// Cyclic Jacobi rotations on a symmetric matrix. Each eigenvector is signed
/// so its largest-magnitude entry is positive; equal eigenvalues are ordered
/// by the first differing eigenvector entry, larger first.
EigenResult symmetric_eigen(const Tensor& a);

/// Inverse of a symmetric positive definite matrix through its eigenvalues.
/// Throws RankError when the smallest eigenvalue is not above
/// rel_tol * largest.
Tensor spd_inverse(const Tensor& a, double rel_tol = 1e-11);

Tensor identity(std::size_t n);

/// Column means of an n x p matrix.
std::vector<double> column_means(const Tensor& x);

/// Covariance of the rows of x around their mean, divided by `divisor`.
Tensor covariance(const Tensor& x, double divisor);

}  // namespace ratemb::linalg
