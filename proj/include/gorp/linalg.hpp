#pragma once

#include <cstddef>
#include <vector>

#include "gorp/matrix.hpp"

namespace gorp {

/// Thin SVD m = u * diag(s) * vt with p = min(rows, cols) columns.
/// u has orthonormal columns, vt orthonormal rows, s nonincreasing and >= 0.
/// Sign convention: the first nonzero entry of each u column is nonnegative.
struct SvdResult {
    Matrix u;
    std::vector<double> singular_values;
    Matrix vt;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at_b(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix transpose(const Matrix& m);

double frobenius_norm_sq(const Matrix& m);

/// y += alpha * x (shapes must match).
void axpy(double alpha, const Matrix& x, Matrix& y);

/// One-sided Jacobi SVD, iterated to 1e-12 relative off-diagonal mass.
/// Deterministic for a fixed input regardless of thread count.
SvdResult thin_svd(const Matrix& m);

/// Orthonormal basis for the numerically independent directions of the input
/// columns (modified Gram-Schmidt with re-orthogonalization); columns whose
/// residual norm falls below drop_tol are dropped.
Matrix orthonormalize(const Matrix& columns, double drop_tol);

/// Appends the directions of `cols` that are independent of `basis` (and of
/// each other) to `basis`; returns the indices of the input columns kept.
std::vector<std::size_t> orthonormal_extend(Matrix& basis, const Matrix& cols, double drop_tol);

/// Elementwise Adam recurrences shared by the optimizer and its baselines:
/// m = b1*m + (1-b1)*g, v = b2*v + (1-b2)*g.^2.
void adam_update_moments(Matrix& m, Matrix& v, const Matrix& g, double beta1, double beta2);

/// m ./ sqrt(v + eps), elementwise.
Matrix adam_direction(const Matrix& m, const Matrix& v, double eps);

/// Bias-corrected variant: (m/(1-b1^t)) ./ sqrt(v/(1-b2^t) + eps).
Matrix adam_direction_corrected(const Matrix& m, const Matrix& v, double eps, double beta1,
                                double beta2, long t);

}  // namespace gorp
