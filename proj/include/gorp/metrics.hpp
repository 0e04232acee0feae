#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gorp/matrix.hpp"

namespace gorp {

/// Results of one continual run. acc[i][j-i] holds a_{i,j}, the accuracy of
/// task i measured after training task j (0-based, j >= i).
struct MetricsReport {
    std::string method;
    std::uint64_t seed = 0;
    std::size_t num_tasks = 0;
    std::vector<std::vector<double>> acc;
    double final_acc = 0.0;  // ACC: mean of a_{i,T} over tasks
    double bwt = 0.0;        // BWT: mean of a_{i,T} - a_{i,i}; 0 for a single task
    Matrix po;               // T x T parameter-overlap matrix
    Matrix go;               // T x T gradient-overlap matrix
    std::vector<std::vector<double>> loss_trace;  // per task, per step
    std::vector<double> task_seconds;
    std::optional<double> heldout_acc;
    double max_ortho_residual = 0.0;
};

/// Checks that the accuracy triangle is complete for num_tasks tasks.
void check_accuracy_triangle(const MetricsReport& report);

/// Squared-Frobenius overlap ||x^T y||_F^2 of two equally-shaped matrices.
double overlap_sq(const Matrix& x, const Matrix& y);

/// Fills final_acc, bwt and the PO/GO matrices. The snapshot lists hold one
/// entry per task; each entry is the per-LoRA-layer A matrix (for PO) or its
/// end-of-task first moment (for GO); overlaps average over layers.
void fill_metrics(MetricsReport& report, const std::vector<std::vector<Matrix>>& lora_a_per_task,
                  const std::vector<std::vector<Matrix>>& moment_a_per_task);

/// Mean over unordered pairs i < j of the matrix entries.
double mean_pairwise(const Matrix& m);

/// Report file: "key = value" header (method, seed, ACC, BWT, optionally
/// HELDOUT), blank line, then ACC_MATRIX (T triangular rows), PO_MATRIX and
/// GO_MATRIX (T full rows each). Loss traces and timings live in separate
/// files because the report must be byte-identical across reruns.
void save_report(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport load_report(const std::filesystem::path& path);

}  // namespace gorp
