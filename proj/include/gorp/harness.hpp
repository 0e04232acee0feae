#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gorp/metrics.hpp"
#include "gorp/run_config.hpp"

namespace gorp {

/// Trains the configured method over the task sequence, evaluating every
/// seen task after each one. When cfg.output_dir is set, writes report.txt,
/// loss_trace.txt, timing.txt and (for gorp) the per-layer space snapshots.
MetricsReport run_continual(const RunConfig& cfg);

struct CompareRow {
    std::string name;
    std::string method;
    std::uint64_t seed = 0;
    double acc = 0.0;
    double bwt = 0.0;
    double mean_po = 0.0;
    double mean_go = 0.0;
};

/// Runs each config (they must share a task signature) and writes an aligned
/// comparison table plus per-run GO matrices under out_dir.
std::vector<CompareRow> compare_runs(const std::vector<std::filesystem::path>& config_paths,
                                     const std::filesystem::path& out_dir);

void write_compare_table(const std::vector<CompareRow>& rows, const std::filesystem::path& path);

}  // namespace gorp
