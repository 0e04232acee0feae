#include "gorp/tasks.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gorp/error.hpp"
#include "gorp/rng.hpp"

namespace gorp {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;
constexpr double kMeanRadius = 3.0;

struct Split {
    Matrix inputs;
    std::vector<int> labels;
};

// Balanced labels (round-robin then shuffled) around the given class means.
Split sample_blobs(Rng& rng, const std::vector<std::vector<double>>& means, std::size_t n,
                   std::size_t dim, double sigma) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = static_cast<int>(i % means.size());
    }
    rng.shuffle(labels);
    Matrix inputs(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& mean = means[static_cast<std::size_t>(labels[i])];
        for (std::size_t j = 0; j < dim; ++j) {
            inputs(i, j) = mean[j] + sigma * rng.gauss();
        }
    }
    return {std::move(inputs), std::move(labels)};
}

}  // namespace

void validate(const TaskDataset& data) {
    if (data.num_classes < 2) {
        throw DataError("dataset '" + data.name + "': need at least 2 classes");
    }
    if (data.train_labels.empty() || data.test_labels.empty()) {
        throw DataError("dataset '" + data.name + "': train and test must be nonempty");
    }
    if (data.train_inputs.rows() != data.train_labels.size() ||
        data.test_inputs.rows() != data.test_labels.size() ||
        data.train_inputs.cols() != data.test_inputs.cols()) {
        throw DataError("dataset '" + data.name + "': inconsistent shapes");
    }
    if (!data.train_inputs.all_finite() || !data.test_inputs.all_finite()) {
        throw DataError("dataset '" + data.name + "': non-finite features");
    }
    const int classes = static_cast<int>(data.num_classes);
    for (int y : data.train_labels) {
        if (y < 0 || y >= classes) {
            throw DataError("dataset '" + data.name + "': train label " + std::to_string(y) +
                            " outside [0, " + std::to_string(classes) + ")");
        }
    }
    for (int y : data.test_labels) {
        if (y < 0 || y >= classes) {
            throw DataError("dataset '" + data.name + "': test label " + std::to_string(y) +
                            " outside [0, " + std::to_string(classes) + ")");
        }
    }
}

void validate(const TaskSequence& seq) {
    if (seq.tasks.empty()) {
        throw DataError("task sequence is empty");
    }
    for (const TaskDataset& task : seq.tasks) {
        validate(task);
        if (task.dim() != seq.tasks.front().dim() ||
            task.num_classes != seq.tasks.front().num_classes) {
            throw DataError("task '" + task.name + "' does not share the sequence dims");
        }
    }
}

TaskSequence gen_rotated(const RotatedParams& p) {
    if (p.dim < 2 || p.num_classes < 2) {
        throw SpecError("gen_rotated: need dim >= 2 and num_classes >= 2");
    }
    if (p.train_per_task == 0 || p.test_per_task == 0 || p.num_tasks == 0) {
        throw SpecError("gen_rotated: counts must be positive");
    }
    TaskSequence seq;
    seq.order_label = "rotated";
    for (std::size_t k = 0; k < p.num_tasks; ++k) {
        Rng rng(mix_seed(p.seed, 0x726f74 + k));
        std::vector<std::vector<double>> means(p.num_classes, std::vector<double>(p.dim, 0.0));
        const double task_angle = static_cast<double>(k) * p.angle_step_deg * kPi / 180.0;
        for (std::size_t c = 0; c < p.num_classes; ++c) {
            const double theta =
                2.0 * kPi * static_cast<double>(c) / static_cast<double>(p.num_classes) +
                task_angle;
            means[c][0] = kMeanRadius * std::cos(theta);
            means[c][1] = kMeanRadius * std::sin(theta);
        }
        TaskDataset task;
        task.name = "rotated_" + std::to_string(k + 1);
        task.num_classes = p.num_classes;
        Split train = sample_blobs(rng, means, p.train_per_task, p.dim, p.noise_sigma);
        Split test = sample_blobs(rng, means, p.test_per_task, p.dim, p.noise_sigma);
        task.train_inputs = std::move(train.inputs);
        task.train_labels = std::move(train.labels);
        task.test_inputs = std::move(test.inputs);
        task.test_labels = std::move(test.labels);
        seq.tasks.push_back(std::move(task));
    }
    validate(seq);
    return seq;
}

TaskSequence gen_permuted(const TaskDataset& base, std::size_t num_tasks, std::uint64_t seed) {
    validate(base);
    if (num_tasks == 0) {
        throw SpecError("gen_permuted: need at least one task");
    }
    TaskSequence seq;
    seq.order_label = "permuted";
    for (std::size_t k = 0; k < num_tasks; ++k) {
        TaskDataset task = base;
        task.name = "permuted_" + std::to_string(k + 1);
        if (k > 0) {
            Rng rng(mix_seed(seed, 0x7065726d + k));
            std::vector<std::size_t> perm(base.dim());
            std::iota(perm.begin(), perm.end(), 0);
            rng.shuffle(perm);
            auto apply = [&](const Matrix& src) {
                Matrix dst(src.rows(), src.cols());
                for (std::size_t i = 0; i < src.rows(); ++i) {
                    for (std::size_t j = 0; j < src.cols(); ++j) {
                        dst(i, j) = src(i, perm[j]);
                    }
                }
                return dst;
            };
            task.train_inputs = apply(base.train_inputs);
            task.test_inputs = apply(base.test_inputs);
        }
        seq.tasks.push_back(std::move(task));
    }
    return seq;
}

void save_dataset(const TaskDataset& data, const std::filesystem::path& path) {
    validate(data);
    std::ofstream out(path);
    if (!out) {
        throw IoError("save_dataset: cannot open " + path.string());
    }
    const std::size_t d = data.dim();
    out << d << " " << data.num_classes << " " << data.train_labels.size() << " "
        << data.test_labels.size() << "\n";
    char buf[40];
    auto write_block = [&](const Matrix& inputs, const std::vector<int>& labels) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            out << labels[i];
            for (std::size_t j = 0; j < d; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", inputs(i, j));
                out << " " << buf;
            }
            out << "\n";
        }
    };
    write_block(data.train_inputs, data.train_labels);
    write_block(data.test_inputs, data.test_labels);
    if (!out) {
        throw IoError("save_dataset: write failed for " + path.string());
    }
}

TaskDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_dataset: cannot open " + path.string());
    }
    const std::string where = path.string();
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(where + ":1: missing header");
    }
    std::size_t d = 0;
    std::size_t classes = 0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    {
        std::istringstream hdr(line);
        std::string extra;
        if (!(hdr >> d >> classes >> n_train >> n_test) || (hdr >> extra)) {
            throw ParseError(where + ":1: bad header '" + line + "'");
        }
    }
    if (d == 0 || classes < 2 || n_train == 0 || n_test == 0) {
        throw ParseError(where + ":1: degenerate header '" + line + "'");
    }

    TaskDataset data;
    data.name = path.stem().string();
    data.num_classes = classes;
    data.train_inputs = Matrix(n_train, d);
    data.train_labels.resize(n_train);
    data.test_inputs = Matrix(n_test, d);
    data.test_labels.resize(n_test);

    std::size_t lineno = 1;
    auto read_block = [&](Matrix& inputs, std::vector<int>& labels) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            ++lineno;
            if (!std::getline(in, line)) {
                throw ParseError(where + ":" + std::to_string(lineno) +
                                 ": missing record (header promised more)");
            }
            std::istringstream row(line);
            long label = 0;
            if (!(row >> label)) {
                throw ParseError(where + ":" + std::to_string(lineno) + ": missing label");
            }
            if (label < 0 || label >= static_cast<long>(classes)) {
                throw DataError(where + ":" + std::to_string(lineno) + ": label " +
                                std::to_string(label) + " outside [0, " + std::to_string(classes) +
                                ")");
            }
            labels[i] = static_cast<int>(label);
            for (std::size_t j = 0; j < d; ++j) {
                if (!(row >> inputs(i, j))) {
                    throw ParseError(where + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(d) + " features");
                }
            }
            std::string extra;
            if (row >> extra) {
                throw ParseError(where + ":" + std::to_string(lineno) + ": trailing tokens");
            }
        }
    };
    read_block(data.train_inputs, data.train_labels);
    read_block(data.test_inputs, data.test_labels);
    if (std::getline(in, line) && !line.empty()) {
        throw ParseError(where + ":" + std::to_string(lineno + 1) +
                         ": more records than the header declared");
    }
    validate(data);
    return data;
}

}  // namespace gorp
