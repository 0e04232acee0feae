#include "gorp/ref_kernels.hpp"

#include <cmath>

#include "gorp/error.hpp"

namespace gorp::ref {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("ref::matmul: inner dimensions differ, a is " + shape_str(a) +
                         ", b is " + shape_str(b));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += a(i, k) * b(k, j);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

double frobenius_norm_sq(const Matrix& m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            acc += m(i, j) * m(i, j);
        }
    }
    return acc;
}

void adam_update_moments(Matrix& m, Matrix& v, const Matrix& g, double beta1, double beta2) {
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
            m(i, j) = beta1 * m(i, j) + (1.0 - beta1) * g(i, j);
            v(i, j) = beta2 * v(i, j) + (1.0 - beta2) * g(i, j) * g(i, j);
        }
    }
}

Matrix adam_direction(const Matrix& m, const Matrix& v, double eps) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out(i, j) = m(i, j) / std::sqrt(v(i, j) + eps);
        }
    }
    return out;
}

Matrix project_out(const Matrix& basis, const Matrix& g) {
    if (basis.cols() == 0) {
        return g;
    }
    Matrix coeff(basis.cols(), g.cols());
    for (std::size_t q = 0; q < basis.cols(); ++q) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.rows(); ++i) {
                acc += basis(i, q) * g(i, j);
            }
            coeff(q, j) = acc;
        }
    }
    Matrix out = g;
    for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t q = 0; q < basis.cols(); ++q) {
                acc += basis(i, q) * coeff(q, j);
            }
            out(i, j) -= acc;
        }
    }
    return out;
}

}  // namespace gorp::ref
