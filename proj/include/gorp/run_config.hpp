#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gorp/net.hpp"
#include "gorp/optimizer.hpp"
#include "gorp/tasks.hpp"

namespace gorp {

enum class Method { gorp, seq_adam, seq_lora_adam };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

struct TaskSourceConfig {
    std::string kind = "rotated";  // rotated | permuted | files
    std::size_t num_tasks = 3;
    std::size_t train_per_task = 1000;
    std::size_t test_per_task = 500;
    double angle_step_deg = 30.0;
    double noise_sigma = 0.4;
    std::optional<std::uint64_t> seed;  // defaults to the run seed
    std::string base_file;              // permuted
    std::vector<std::string> files;     // files
};

struct RunConfig {
    Method method = Method::gorp;
    std::uint64_t seed = 17;
    std::size_t epochs_per_task = 1;
    std::size_t batch_size = 8;
    std::string output_dir;  // empty: nothing persisted
    bool eval_heldout = false;
    ModelSpec model;
    GorpConfig opt;
    TaskSourceConfig tasks;
};

/// Calibrated desk-scale defaults: 32-dim inputs, 4 classes, a LoRA layer
/// feeding two full-rank layers, and the 3-task rotated sequence.
RunConfig default_run_config();

/// Line-based "key = value" file with dotted keys; '#' starts a comment.
/// Unknown keys are errors. See docs/config reference in the README.
RunConfig parse_run_config(const std::filesystem::path& path);

void validate(const RunConfig& cfg);

/// Canonical description of the resolved task source; two runs are
/// comparable when these match.
std::string task_signature(const RunConfig& cfg);

/// Materializes the task sequence; with eval_heldout an extra task is
/// generated (or taken from the last file) and returned separately.
struct ResolvedTasks {
    TaskSequence sequence;
    std::optional<TaskDataset> heldout;
};
ResolvedTasks resolve_tasks(const RunConfig& cfg);

}  // namespace gorp
