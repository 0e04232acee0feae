#include "gorp/subspace.hpp"

#include <algorithm>
#include <cassert>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gorp/error.hpp"

namespace gorp {

namespace {

#ifndef NDEBUG
// Debug builds verify the basis after every mutation.
bool basis_is_orthonormal(const Matrix& basis) {
    const Matrix gram = matmul_at_b(basis, basis);
    for (std::size_t i = 0; i < gram.rows(); ++i) {
        for (std::size_t j = 0; j < gram.cols(); ++j) {
            if (std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)) > 1e-10) {
                return false;
            }
        }
    }
    return true;
}
#endif

// Directions this far below the leading singular value carry no usable
// energy; selecting them would only pad the basis with numerical noise.
constexpr double kNegligibleRel = 1e-12;

void check_sorted(std::span<const double> s) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
        if (s[i] < s[i + 1]) {
            throw UsageError("krank_select: singular values not nonincreasing at index " +
                             std::to_string(i + 1));
        }
    }
}

std::size_t trim_negligible(std::span<const double> s, std::size_t k) {
    if (s.empty() || k == 0) {
        return 0;
    }
    const double cutoff = kNegligibleRel * s[0];
    while (k > 0 && s[k - 1] <= cutoff) {
        --k;
    }
    return k;
}

Matrix left_vectors(const SvdResult& svd, std::size_t k) {
    Matrix out(svd.u.rows(), k);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            out(i, j) = svd.u(i, j);
        }
    }
    return out;
}

}  // namespace

void validate(const SubspaceConfig& cfg) {
    if (!(cfg.threshold > 0.0 && cfg.threshold <= 1.0)) {
        throw ConfigError("subspace threshold must be in (0, 1], got " +
                          std::to_string(cfg.threshold));
    }
    if (!(cfg.drop_tol > 0.0)) {
        throw ConfigError("subspace drop_tol must be > 0");
    }
}

std::size_t krank_select(std::span<const double> singular_values, double total_energy,
                         double carried_energy, double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw UsageError("krank_select: threshold must be in (0, 1]");
    }
    if (carried_energy < 0.0 || total_energy < carried_energy) {
        throw UsageError("krank_select: need total_energy >= carried_energy >= 0");
    }
    check_sorted(singular_values);

    const double target = threshold * total_energy;
    double captured = carried_energy;
    if (captured >= target) {
        return 0;
    }
    for (std::size_t k = 0; k < singular_values.size(); ++k) {
        captured += singular_values[k] * singular_values[k];
        if (captured >= target) {
            return k + 1;
        }
    }
    return singular_values.size();
}

GradientSharedSpace build_first(const Matrix& moment, const SubspaceConfig& cfg) {
    validate(cfg);
    GradientSharedSpace space;
    space.capacity = cfg.capacity;
    space.basis = Matrix(moment.rows(), 0);

    const double total = frobenius_norm_sq(moment);
    if (total == 0.0 || cfg.capacity == 0) {
        return space;
    }
    const SvdResult svd = thin_svd(moment);
    std::size_t k = krank_select(svd.singular_values, total, 0.0, cfg.threshold);
    k = trim_negligible(svd.singular_values, k);
    k = std::min(k, cfg.capacity);

    space.basis = left_vectors(svd, k);
    space.importance.assign(svd.singular_values.begin(), svd.singular_values.begin() + k);
    return space;
}

GradientSharedSpace extend(GradientSharedSpace space, const Matrix& moment,
                           const SubspaceConfig& cfg) {
    validate(cfg);
    if (space.q() > 0 && space.basis.rows() != moment.rows()) {
        throw ShapeError("extend: basis is " + shape_str(space.basis) + ", moment is " +
                         shape_str(moment));
    }
    space.capacity = cfg.capacity;
    if (space.basis.rows() == 0) {
        space.basis = Matrix(moment.rows(), 0);
    }

    const double total = frobenius_norm_sq(moment);
    if (total == 0.0 || cfg.capacity == 0) {
        return truncate_to_capacity(std::move(space));
    }

    Matrix residual = moment;
    double carried = 0.0;
    if (!space.empty()) {
        const Matrix coeff = matmul_at_b(space.basis, moment);  // S^T M
        // rounding can push the captured energy a hair above the total
        carried = std::min(frobenius_norm_sq(coeff), total);
        axpy(-1.0, matmul(space.basis, coeff), residual);
    }

    const SvdResult svd = thin_svd(residual);
    std::size_t k = krank_select(svd.singular_values, total, carried, cfg.threshold);
    k = trim_negligible(svd.singular_values, k);
    if (k > 0) {
        const std::vector<std::size_t> kept =
            orthonormal_extend(space.basis, left_vectors(svd, k), cfg.drop_tol);
        for (std::size_t j : kept) {
            space.importance.push_back(svd.singular_values[j]);
        }
    }
    assert(basis_is_orthonormal(space.basis));
    return truncate_to_capacity(std::move(space));
}

GradientSharedSpace truncate_to_capacity(GradientSharedSpace space) {
    if (space.q() <= space.capacity) {
        return space;
    }
    std::vector<std::size_t> order(space.q());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return space.importance[a] > space.importance[b];
    });
    order.resize(space.capacity);
    std::sort(order.begin(), order.end());  // stable original order among kept columns

    Matrix basis(space.basis.rows(), order.size());
    std::vector<double> importance(order.size());
    for (std::size_t j = 0; j < order.size(); ++j) {
        importance[j] = space.importance[order[j]];
        for (std::size_t i = 0; i < basis.rows(); ++i) {
            basis(i, j) = space.basis(i, order[j]);
        }
    }
    space.basis = std::move(basis);
    space.importance = std::move(importance);
    assert(basis_is_orthonormal(space.basis));
    return space;
}

Matrix project_out(const GradientSharedSpace& space, const Matrix& g) {
    if (space.empty()) {
        return g;
    }
    if (space.basis.rows() != g.rows()) {
        throw ShapeError("project_out: basis is " + shape_str(space.basis) + ", gradient is " +
                         shape_str(g));
    }
    Matrix out = g;
    axpy(-1.0, matmul(space.basis, matmul_at_b(space.basis, g)), out);
    return out;
}

void save_space(const GradientSharedSpace& space, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("save_space: cannot open " + path.string());
    }
    char buf[40];
    const std::size_t m = space.basis.rows();
    const std::size_t q = space.q();
    out << m << " " << q << "\n";
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < q; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", space.basis(i, j));
            out << (j ? " " : "") << buf;
        }
        out << "\n";
    }
    for (std::size_t j = 0; j < q; ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", space.importance[j]);
        out << (j ? " " : "") << buf;
    }
    out << "\n";
    if (!out) {
        throw IoError("save_space: write failed for " + path.string());
    }
}

GradientSharedSpace load_space(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_space: cannot open " + path.string());
    }
    std::size_t m = 0;
    std::size_t q = 0;
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("load_space: " + path.string() + ":1: missing header");
    }
    {
        std::istringstream hdr(line);
        if (!(hdr >> m >> q)) {
            throw ParseError("load_space: " + path.string() + ":1: bad header '" + line + "'");
        }
    }
    GradientSharedSpace space;
    space.basis = Matrix(m, q);
    space.capacity = std::max<std::size_t>(q, 1);
    for (std::size_t i = 0; i < m; ++i) {
        if (!std::getline(in, line)) {
            throw ParseError("load_space: " + path.string() + ":" + std::to_string(i + 2) +
                             ": missing basis row");
        }
        std::istringstream row(line);
        for (std::size_t j = 0; j < q; ++j) {
            if (!(row >> space.basis(i, j))) {
                throw ParseError("load_space: " + path.string() + ":" + std::to_string(i + 2) +
                                 ": expected " + std::to_string(q) + " values");
            }
        }
    }
    space.importance.resize(q);
    if (q > 0) {
        if (!std::getline(in, line)) {
            throw ParseError("load_space: " + path.string() + ": missing importance line");
        }
        std::istringstream row(line);
        for (std::size_t j = 0; j < q; ++j) {
            if (!(row >> space.importance[j])) {
                throw ParseError("load_space: " + path.string() + ": importance line too short");
            }
        }
    }
    return space;
}

}  // namespace gorp
