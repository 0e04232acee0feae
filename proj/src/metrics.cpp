#include "gorp/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gorp/error.hpp"
#include "gorp/linalg.hpp"

namespace gorp {

void check_accuracy_triangle(const MetricsReport& report) {
    const std::size_t t = report.num_tasks;
    if (t == 0 || report.acc.size() != t) {
        throw UsageError("metrics: accuracy matrix holds " + std::to_string(report.acc.size()) +
                         " rows, expected " + std::to_string(t));
    }
    for (std::size_t i = 0; i < t; ++i) {
        if (report.acc[i].size() != t - i) {
            throw UsageError("metrics: accuracy row " + std::to_string(i) + " has " +
                             std::to_string(report.acc[i].size()) + " cells, expected " +
                             std::to_string(t - i));
        }
        for (double a : report.acc[i]) {
            if (!(a >= 0.0 && a <= 1.0)) {
                throw UsageError("metrics: accuracy " + std::to_string(a) + " outside [0, 1]");
            }
        }
    }
}

double overlap_sq(const Matrix& x, const Matrix& y) {
    return frobenius_norm_sq(matmul_at_b(x, y));
}

namespace {

Matrix overlap_matrix(const std::vector<std::vector<Matrix>>& per_task) {
    const std::size_t t = per_task.size();
    Matrix out(t, t);
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            const std::size_t layers = per_task[i].size();
            if (layers == 0 || per_task[j].size() != layers) {
                continue;
            }
            double acc = 0.0;
            for (std::size_t l = 0; l < layers; ++l) {
                acc += overlap_sq(per_task[i][l], per_task[j][l]);
            }
            out(i, j) = acc / static_cast<double>(layers);
        }
    }
    return out;
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

void fill_metrics(MetricsReport& report, const std::vector<std::vector<Matrix>>& lora_a_per_task,
                  const std::vector<std::vector<Matrix>>& moment_a_per_task) {
    check_accuracy_triangle(report);
    const std::size_t t = report.num_tasks;

    double acc_sum = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        acc_sum += report.acc[i].back();  // a_{i,T}
    }
    report.final_acc = acc_sum / static_cast<double>(t);

    if (t > 1) {
        double bwt_sum = 0.0;
        for (std::size_t i = 0; i + 1 < t; ++i) {
            bwt_sum += report.acc[i].back() - report.acc[i].front();  // a_{i,T} - a_{i,i}
        }
        report.bwt = bwt_sum / static_cast<double>(t - 1);
    } else {
        report.bwt = 0.0;  // undefined by the formula; reported as zero
    }

    if (lora_a_per_task.size() == t) {
        report.po = overlap_matrix(lora_a_per_task);
    } else {
        report.po = Matrix(t, t);
    }
    if (moment_a_per_task.size() == t) {
        report.go = overlap_matrix(moment_a_per_task);
    } else {
        report.go = Matrix(t, t);
    }
}

double mean_pairwise(const Matrix& m) {
    const std::size_t t = m.rows();
    if (t < 2) {
        return 0.0;
    }
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = i + 1; j < t; ++j) {
            acc += m(i, j);
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

void save_report(const MetricsReport& report, const std::filesystem::path& path) {
    check_accuracy_triangle(report);
    std::ofstream out(path);
    if (!out) {
        throw IoError("save_report: cannot open " + path.string());
    }
    out << "method = " << report.method << "\n";
    out << "seed = " << report.seed << "\n";
    out << "ACC = " << fmt17(report.final_acc) << "\n";
    out << "BWT = " << fmt17(report.bwt) << "\n";
    if (report.heldout_acc) {
        out << "HELDOUT = " << fmt17(*report.heldout_acc) << "\n";
    }
    out << "\n";
    out << "ACC_MATRIX\n";
    for (const auto& row : report.acc) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            out << (j ? " " : "") << fmt17(row[j]);
        }
        out << "\n";
    }
    auto write_square = [&](const char* name, const Matrix& m) {
        out << name << "\n";
        for (std::size_t i = 0; i < m.rows(); ++i) {
            for (std::size_t j = 0; j < m.cols(); ++j) {
                out << (j ? " " : "") << fmt17(m(i, j));
            }
            out << "\n";
        }
    };
    write_square("PO_MATRIX", report.po);
    write_square("GO_MATRIX", report.go);
    if (!out) {
        throw IoError("save_report: write failed for " + path.string());
    }
}

MetricsReport load_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("load_report: cannot open " + path.string());
    }
    const std::string where = path.string();
    MetricsReport report;
    std::string line;
    std::size_t lineno = 0;

    // header
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            break;
        }
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) {
            throw ParseError(where + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 3);
        try {
            if (key == "method") {
                report.method = value;
            } else if (key == "seed") {
                report.seed = std::stoull(value);
            } else if (key == "ACC") {
                report.final_acc = std::stod(value);
            } else if (key == "BWT") {
                report.bwt = std::stod(value);
            } else if (key == "HELDOUT") {
                report.heldout_acc = std::stod(value);
            } else {
                throw ParseError(where + ":" + std::to_string(lineno) + ": unknown key '" + key +
                                 "'");
            }
        } catch (const std::invalid_argument&) {
            throw ParseError(where + ":" + std::to_string(lineno) + ": bad value '" + value + "'");
        }
    }

    ++lineno;
    if (!std::getline(in, line) || line != "ACC_MATRIX") {
        throw ParseError(where + ":" + std::to_string(lineno) + ": expected ACC_MATRIX");
    }
    // triangular rows until PO_MATRIX
    while (std::getline(in, line)) {
        ++lineno;
        if (line == "PO_MATRIX") {
            break;
        }
        std::istringstream row(line);
        std::vector<double> values;
        double x = 0.0;
        while (row >> x) {
            values.push_back(x);
        }
        if (values.empty()) {
            throw ParseError(where + ":" + std::to_string(lineno) + ": empty accuracy row");
        }
        report.acc.push_back(std::move(values));
    }
    report.num_tasks = report.acc.size();
    const std::size_t t = report.num_tasks;

    auto read_square = [&](const char* next_header) {
        Matrix m(t, t);
        for (std::size_t i = 0; i < t; ++i) {
            ++lineno;
            if (!std::getline(in, line)) {
                throw ParseError(where + ":" + std::to_string(lineno) + ": truncated matrix");
            }
            std::istringstream row(line);
            for (std::size_t j = 0; j < t; ++j) {
                if (!(row >> m(i, j))) {
                    throw ParseError(where + ":" + std::to_string(lineno) + ": expected " +
                                     std::to_string(t) + " values");
                }
            }
        }
        if (next_header != nullptr) {
            ++lineno;
            if (!std::getline(in, line) || line != next_header) {
                throw ParseError(where + ":" + std::to_string(lineno) + ": expected " +
                                 std::string(next_header));
            }
        }
        return m;
    };
    report.po = read_square("GO_MATRIX");
    report.go = read_square(nullptr);
    check_accuracy_triangle(report);
    return report;
}

}  // namespace gorp
