#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gorp/matrix.hpp"

namespace gorp {

struct TaskDataset {
    std::string name;
    Matrix train_inputs;
    std::vector<int> train_labels;
    Matrix test_inputs;
    std::vector<int> test_labels;
    std::size_t num_classes = 0;

    std::size_t dim() const { return train_inputs.cols(); }
};

void validate(const TaskDataset& data);

struct TaskSequence {
    std::string order_label;
    std::vector<TaskDataset> tasks;
};

void validate(const TaskSequence& seq);

struct RotatedParams {
    std::size_t num_tasks = 3;
    std::size_t train_per_task = 1000;
    std::size_t test_per_task = 500;
    std::size_t dim = 32;
    std::size_t num_classes = 4;
    double angle_step_deg = 30.0;
    double noise_sigma = 0.4;
    std::uint64_t seed = 0;
};

/// Gaussian blobs whose class means sit on a circle in the first two
/// coordinates; task k rotates every mean by k * angle_step. Labels are
/// exactly balanced (round-robin, then shuffled).
TaskSequence gen_rotated(const RotatedParams& params);

/// Task 1 is the base dataset; task k >= 2 applies a fixed random feature
/// permutation to it.
TaskSequence gen_permuted(const TaskDataset& base, std::size_t num_tasks, std::uint64_t seed);

/// Text format: header "d C n_train n_test", then one "label f1 .. fd" line
/// per record, train block first. Round-trips bitwise.
void save_dataset(const TaskDataset& data, const std::filesystem::path& path);
TaskDataset load_dataset(const std::filesystem::path& path);

}  // namespace gorp
