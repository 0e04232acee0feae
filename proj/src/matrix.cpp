#include "gorp/matrix.hpp"

#include <cmath>

#include "gorp/error.hpp"

namespace gorp {

Matrix Matrix::identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, i) = 1.0;
    }
    return out;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix out(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw ShapeError("from_rows: ragged rows (" + std::to_string(row.size()) +
                             " vs " + std::to_string(c) + ")");
        }
        std::size_t j = 0;
        for (double x : row) {
            out(i, j++) = x;
        }
        ++i;
    }
    return out;
}

bool Matrix::all_finite() const noexcept {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

std::string shape_str(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

}  // namespace gorp
