#pragma once

#include "gorp/matrix.hpp"

namespace gorp::ref {

// Serial reference kernels. Naive textbook loops, no OpenMP, kept as test
// oracles for the parallel kernels in gorp/linalg.hpp and as the baseline
// side of tools/kernel_bench.

Matrix matmul(const Matrix& a, const Matrix& b);
double frobenius_norm_sq(const Matrix& m);
void adam_update_moments(Matrix& m, Matrix& v, const Matrix& g, double beta1, double beta2);
Matrix adam_direction(const Matrix& m, const Matrix& v, double eps);

/// g - basis * (basis^T * g), computed with naive loops.
Matrix project_out(const Matrix& basis, const Matrix& g);

}  // namespace gorp::ref
