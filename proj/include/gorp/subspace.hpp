#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "gorp/linalg.hpp"
#include "gorp/matrix.hpp"

namespace gorp {

struct SubspaceConfig {
    double threshold = 0.97;    // energy fraction a task must leave captured
    std::size_t capacity = 64;  // max basis columns per layer; 0 disables the space
    double drop_tol = 1e-10;    // orthonormalization drop tolerance
};

void validate(const SubspaceConfig& cfg);

/// Per-layer orthonormal basis of dominant past-task gradient directions,
/// with the retained singular value of each column as its importance.
struct GradientSharedSpace {
    int layer_id = -1;
    Matrix basis;  // m x q, orthonormal columns
    std::vector<double> importance;
    std::size_t capacity = 64;

    std::size_t q() const noexcept { return basis.cols(); }
    bool empty() const noexcept { return basis.cols() == 0; }
};

/// Minimal k such that carried_energy + sum of the first k squared singular
/// values reaches threshold * total_energy; 0 when carried_energy alone does,
/// capped at the list length when even the full sum falls short.
std::size_t krank_select(std::span<const double> singular_values, double total_energy,
                         double carried_energy, double threshold);

/// First-task construction: top-k left singular vectors of the moment.
GradientSharedSpace build_first(const Matrix& moment, const SubspaceConfig& cfg);

/// Later-task extension: SVD of the residual of the moment against the
/// current basis, appending enough new directions to reach the threshold,
/// then capacity truncation.
GradientSharedSpace extend(GradientSharedSpace space, const Matrix& moment,
                           const SubspaceConfig& cfg);

/// Keeps the `capacity` columns of largest importance (stable order).
GradientSharedSpace truncate_to_capacity(GradientSharedSpace space);

/// g - basis * (basis^T * g); an empty space returns g unchanged.
Matrix project_out(const GradientSharedSpace& space, const Matrix& g);

/// Flat text snapshot: "m q" header, basis rows, importance line.
void save_space(const GradientSharedSpace& space, const std::filesystem::path& path);
GradientSharedSpace load_space(const std::filesystem::path& path);

}  // namespace gorp
