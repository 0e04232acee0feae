#include "gorp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "gorp/error.hpp"

namespace gorp {

namespace {

// Parallelize only when there is enough arithmetic to amortize thread fork.
constexpr std::int64_t kFlopCutoff = 1 << 17;
constexpr std::int64_t kElemCutoff = 1 << 15;

constexpr double kJacobiTol = 1e-12;
constexpr int kJacobiMaxSweeps = 60;

void check_finite(const Matrix& m, const char* op) {
    if (!m.all_finite()) {
        throw NumericError(std::string(op) + ": non-finite input entries");
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ, a is " + shape_str(a) +
                         ", b is " + shape_str(b));
    }
    Matrix out(a.rows(), b.cols());
    const std::int64_t rows = static_cast<std::int64_t>(a.rows());
    const std::int64_t inner = static_cast<std::int64_t>(a.cols());
    const std::int64_t cols = static_cast<std::int64_t>(b.cols());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
#pragma omp parallel for schedule(static) if (rows * inner * cols > kFlopCutoff)
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t k = 0; k < inner; ++k) {
            const double aik = pa[i * inner + k];
            const double* brow = pb + k * cols;
            double* crow = pc + i * cols;
            for (std::int64_t j = 0; j < cols; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_at_b: row counts differ, a is " + shape_str(a) +
                         ", b is " + shape_str(b));
    }
    Matrix out(a.cols(), b.cols());
    const std::int64_t rows = static_cast<std::int64_t>(a.cols());
    const std::int64_t inner = static_cast<std::int64_t>(a.rows());
    const std::int64_t cols = static_cast<std::int64_t>(b.cols());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
#pragma omp parallel for schedule(static) if (rows * inner * cols > kFlopCutoff)
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t k = 0; k < inner; ++k) {
            const double aki = pa[k * rows + i];
            const double* brow = pb + k * cols;
            double* crow = pc + i * cols;
            for (std::int64_t j = 0; j < cols; ++j) {
                crow[j] += aki * brow[j];
            }
        }
    }
    return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_a_bt: column counts differ, a is " + shape_str(a) +
                         ", b is " + shape_str(b));
    }
    Matrix out(a.rows(), b.rows());
    const std::int64_t rows = static_cast<std::int64_t>(a.rows());
    const std::int64_t inner = static_cast<std::int64_t>(a.cols());
    const std::int64_t cols = static_cast<std::int64_t>(b.rows());
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
#pragma omp parallel for schedule(static) if (rows * inner * cols > kFlopCutoff)
    for (std::int64_t i = 0; i < rows; ++i) {
        const double* arow = pa + i * inner;
        double* crow = pc + i * cols;
        for (std::int64_t j = 0; j < cols; ++j) {
            const double* brow = pb + j * inner;
            double acc = 0.0;
            for (std::int64_t k = 0; k < inner; ++k) {
                acc += arow[k] * brow[k];
            }
            crow[j] = acc;
        }
    }
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols(), m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            out(j, i) = m(i, j);
        }
    }
    return out;
}

double frobenius_norm_sq(const Matrix& m) {
    // Per-row partials summed in row order: the result does not depend on the
    // thread count.
    const std::int64_t rows = static_cast<std::int64_t>(m.rows());
    const std::int64_t cols = static_cast<std::int64_t>(m.cols());
    if (rows == 0 || cols == 0) {
        return 0.0;
    }
    std::vector<double> partial(static_cast<std::size_t>(rows), 0.0);
    const double* p = m.data();
#pragma omp parallel for schedule(static) if (rows * cols > kElemCutoff)
    for (std::int64_t i = 0; i < rows; ++i) {
        const double* row = p + i * cols;
        double acc = 0.0;
        for (std::int64_t j = 0; j < cols; ++j) {
            acc += row[j] * row[j];
        }
        partial[static_cast<std::size_t>(i)] = acc;
    }
    double total = 0.0;
    for (double x : partial) {
        total += x;
    }
    return total;
}

void axpy(double alpha, const Matrix& x, Matrix& y) {
    if (!x.same_shape(y)) {
        throw ShapeError("axpy: shapes differ, x is " + shape_str(x) + ", y is " + shape_str(y));
    }
    const std::int64_t n = static_cast<std::int64_t>(x.size());
    const double* px = x.data();
    double* py = y.data();
#pragma omp parallel for schedule(static) if (n > kElemCutoff)
    for (std::int64_t i = 0; i < n; ++i) {
        py[i] += alpha * px[i];
    }
}

void adam_update_moments(Matrix& m, Matrix& v, const Matrix& g, double beta1, double beta2) {
    if (!m.same_shape(g) || !v.same_shape(g)) {
        throw ShapeError("adam_update_moments: moment shape " + shape_str(m) +
                         "/" + shape_str(v) + " vs gradient " + shape_str(g));
    }
    const std::int64_t n = static_cast<std::int64_t>(g.size());
    double* pm = m.data();
    double* pv = v.data();
    const double* pg = g.data();
#pragma omp parallel for schedule(static) if (n > kElemCutoff)
    for (std::int64_t i = 0; i < n; ++i) {
        pm[i] = beta1 * pm[i] + (1.0 - beta1) * pg[i];
        pv[i] = beta2 * pv[i] + (1.0 - beta2) * pg[i] * pg[i];
    }
}

Matrix adam_direction(const Matrix& m, const Matrix& v, double eps) {
    if (!m.same_shape(v)) {
        throw ShapeError("adam_direction: m is " + shape_str(m) + ", v is " + shape_str(v));
    }
    Matrix out(m.rows(), m.cols());
    const std::int64_t n = static_cast<std::int64_t>(m.size());
    const double* pm = m.data();
    const double* pv = v.data();
    double* po = out.data();
#pragma omp parallel for schedule(static) if (n > kElemCutoff)
    for (std::int64_t i = 0; i < n; ++i) {
        po[i] = pm[i] / std::sqrt(pv[i] + eps);
    }
    return out;
}

Matrix adam_direction_corrected(const Matrix& m, const Matrix& v, double eps, double beta1,
                                double beta2, long t) {
    if (!m.same_shape(v)) {
        throw ShapeError("adam_direction_corrected: m is " + shape_str(m) + ", v is " +
                         shape_str(v));
    }
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    Matrix out(m.rows(), m.cols());
    const std::int64_t n = static_cast<std::int64_t>(m.size());
    const double* pm = m.data();
    const double* pv = v.data();
    double* po = out.data();
#pragma omp parallel for schedule(static) if (n > kElemCutoff)
    for (std::int64_t i = 0; i < n; ++i) {
        po[i] = (pm[i] / c1) / std::sqrt(pv[i] / c2 + eps);
    }
    return out;
}

// --------------------------- thin SVD (Jacobi) ---------------------------

namespace {

// Column-major scratch for the one-sided Jacobi sweep.
struct ColMajor {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> d;

    double* col(std::size_t j) { return d.data() + j * rows; }
    const double* col(std::size_t j) const { return d.data() + j * rows; }
};

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

// Orthogonalizes columns p and q of b (accumulating the rotation into v);
// returns the relative off-diagonal mass of the pair before rotation.
double jacobi_rotate(ColMajor& b, ColMajor& v, std::size_t p, std::size_t q) {
    double* bp = b.col(p);
    double* bq = b.col(q);
    const std::size_t m = b.rows;
    const double app = dot(bp, bp, m);
    const double aqq = dot(bq, bq, m);
    const double apq = dot(bp, bq, m);
    if (app == 0.0 || aqq == 0.0) {
        return 0.0;
    }
    const double rel = std::abs(apq) / (std::sqrt(app) * std::sqrt(aqq));
    if (rel <= kJacobiTol) {
        return rel;
    }
    const double zeta = (aqq - app) / (2.0 * apq);
    const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
    const double c = 1.0 / std::sqrt(1.0 + t * t);
    const double s = c * t;
    for (std::size_t i = 0; i < m; ++i) {
        const double x = bp[i];
        const double y = bq[i];
        bp[i] = c * x - s * y;
        bq[i] = s * x + c * y;
    }
    double* vp = v.col(p);
    double* vq = v.col(q);
    for (std::size_t i = 0; i < v.rows; ++i) {
        const double x = vp[i];
        const double y = vq[i];
        vp[i] = c * x - s * y;
        vq[i] = s * x + c * y;
    }
    return rel;
}

// One round-robin schedule: cols (padded to even) players, cols-1 rounds of
// disjoint pairs. Pairs within a round touch disjoint columns, so they can be
// rotated in parallel with a bitwise-deterministic result.
std::vector<std::vector<std::pair<std::size_t, std::size_t>>> round_robin(std::size_t n) {
    std::vector<std::size_t> players(n % 2 == 0 ? n : n + 1);
    std::iota(players.begin(), players.end(), 0);
    const std::size_t np = players.size();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> rounds;
    for (std::size_t r = 0; r + 1 < np; ++r) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < np / 2; ++i) {
            std::size_t a = players[i];
            std::size_t b = players[np - 1 - i];
            if (a >= n || b >= n) {
                continue;  // bye slot for odd n
            }
            pairs.emplace_back(std::min(a, b), std::max(a, b));
        }
        rounds.push_back(std::move(pairs));
        // rotate all but the first player
        std::size_t last = players[np - 1];
        for (std::size_t i = np - 1; i > 1; --i) {
            players[i] = players[i - 1];
        }
        players[1] = last;
    }
    return rounds;
}

// SVD of a tall matrix (rows >= cols) by one-sided Jacobi on columns.
SvdResult thin_svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();

    ColMajor b{m, n, std::vector<double>(m * n)};
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            b.d[j * m + i] = a(i, j);
        }
    }
    ColMajor v{n, n, std::vector<double>(n * n, 0.0)};
    for (std::size_t j = 0; j < n; ++j) {
        v.d[j * n + j] = 1.0;
    }

    const auto rounds = round_robin(n);
    for (int sweep = 0; sweep < kJacobiMaxSweeps && n > 1; ++sweep) {
        double off = 0.0;
        for (const auto& round : rounds) {
            const std::int64_t npairs = static_cast<std::int64_t>(round.size());
#pragma omp parallel for schedule(static) reduction(max : off) \
    if (npairs * static_cast<std::int64_t>(m) > kElemCutoff)
            for (std::int64_t k = 0; k < npairs; ++k) {
                const double rel = jacobi_rotate(b, v, round[k].first, round[k].second);
                off = std::max(off, rel);
            }
        }
        if (off <= kJacobiTol) {
            break;
        }
    }

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        sigma[j] = std::sqrt(dot(b.col(j), b.col(j), m));
    }

    // Stable order by descending singular value (ties keep column order).
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double sigma_max = n > 0 ? sigma[order[0]] : 0.0;
    const double rank_tol =
        static_cast<double>(std::max(m, n)) * std::numeric_limits<double>::epsilon() * sigma_max;

    SvdResult out;
    out.u = Matrix(m, n);
    out.vt = Matrix(n, n);
    out.singular_values.resize(n);
    std::vector<std::size_t> deficient;
    for (std::size_t jj = 0; jj < n; ++jj) {
        const std::size_t src = order[jj];
        out.singular_values[jj] = sigma[src];
        for (std::size_t i = 0; i < n; ++i) {
            out.vt(jj, i) = v.d[src * n + i];
        }
        if (sigma[src] > rank_tol && sigma[src] > 0.0) {
            const double inv = 1.0 / sigma[src];
            const double* bc = b.col(src);
            for (std::size_t i = 0; i < m; ++i) {
                out.u(i, jj) = bc[i] * inv;
            }
        } else {
            deficient.push_back(jj);
        }
    }

    // Complete u for rank-deficient columns: for each missing column, take the
    // unit seed with the largest residual against everything accepted so far
    // (its norm is at least sqrt(1/m) when a complement direction exists).
    std::vector<bool> filled(n, true);
    for (std::size_t jj : deficient) {
        filled[jj] = false;
    }
    std::vector<double> w(m);
    std::vector<double> best(m);
    for (std::size_t jj : deficient) {
        double best_norm = -1.0;
        for (std::size_t seed = 0; seed < m; ++seed) {
            std::fill(w.begin(), w.end(), 0.0);
            w[seed] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t c = 0; c < n; ++c) {
                    if (!filled[c]) {
                        continue;
                    }
                    double proj = 0.0;
                    for (std::size_t i = 0; i < m; ++i) {
                        proj += out.u(i, c) * w[i];
                    }
                    for (std::size_t i = 0; i < m; ++i) {
                        w[i] -= proj * out.u(i, c);
                    }
                }
            }
            const double nrm = std::sqrt(dot(w.data(), w.data(), m));
            if (nrm > best_norm) {
                best_norm = nrm;
                best = w;
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            out.u(i, jj) = best[i] / best_norm;
        }
        filled[jj] = true;
    }
    return out;
}

void apply_sign_convention(SvdResult& r) {
    const std::size_t m = r.u.rows();
    const std::size_t p = r.u.cols();
    for (std::size_t j = 0; j < p; ++j) {
        double lead = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (r.u(i, j) != 0.0) {
                lead = r.u(i, j);
                break;
            }
        }
        if (lead < 0.0) {
            for (std::size_t i = 0; i < m; ++i) {
                r.u(i, j) = -r.u(i, j);
            }
            for (std::size_t i = 0; i < r.vt.cols(); ++i) {
                r.vt(j, i) = -r.vt(j, i);
            }
        }
    }
}

}  // namespace

SvdResult thin_svd(const Matrix& a) {
    if (a.rows() == 0 || a.cols() == 0) {
        throw ShapeError("thin_svd: empty matrix " + shape_str(a));
    }
    check_finite(a, "thin_svd");

    SvdResult out;
    if (a.rows() >= a.cols()) {
        out = thin_svd_tall(a);
    } else {
        // a = (u' s v'^T)^T of the transpose: swap the factor roles.
        SvdResult t = thin_svd_tall(transpose(a));
        out.singular_values = std::move(t.singular_values);
        out.u = transpose(t.vt);
        out.vt = transpose(t.u);
    }
    apply_sign_convention(out);
    return out;
}

Matrix orthonormalize(const Matrix& columns, double drop_tol) {
    Matrix basis(columns.rows(), 0);
    orthonormal_extend(basis, columns, drop_tol);
    return basis;
}

std::vector<std::size_t> orthonormal_extend(Matrix& basis, const Matrix& cols, double drop_tol) {
    if (drop_tol <= 0.0) {
        throw UsageError("orthonormal_extend: drop_tol must be > 0");
    }
    if (cols.cols() == 0) {
        return {};
    }
    if (basis.cols() > 0 && basis.rows() != cols.rows()) {
        throw ShapeError("orthonormal_extend: basis is " + shape_str(basis) + ", columns are " +
                         shape_str(cols));
    }
    const std::size_t m = cols.rows();
    std::vector<std::vector<double>> accepted;
    accepted.reserve(basis.cols() + cols.cols());
    for (std::size_t j = 0; j < basis.cols(); ++j) {
        std::vector<double> c(m);
        for (std::size_t i = 0; i < m; ++i) {
            c[i] = basis(i, j);
        }
        accepted.push_back(std::move(c));
    }

    std::vector<std::size_t> kept;
    std::vector<double> w(m);
    for (std::size_t j = 0; j < cols.cols(); ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            w[i] = cols(i, j);
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : accepted) {
                const double proj = dot(b.data(), w.data(), m);
                for (std::size_t i = 0; i < m; ++i) {
                    w[i] -= proj * b[i];
                }
            }
        }
        const double nrm = std::sqrt(dot(w.data(), w.data(), m));
        if (nrm >= drop_tol) {
            std::vector<double> c(m);
            for (std::size_t i = 0; i < m; ++i) {
                c[i] = w[i] / nrm;
            }
            accepted.push_back(std::move(c));
            kept.push_back(j);
        }
    }

    Matrix out(m, accepted.size());
    for (std::size_t j = 0; j < accepted.size(); ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            out(i, j) = accepted[j][i];
        }
    }
    basis = std::move(out);
    return kept;
}

}  // namespace gorp
