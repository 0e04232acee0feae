// Command-line front end: run a configured continual-learning experiment,
// compare methods, generate synthetic task data, or summarize a report.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gorp/error.hpp"
#include "gorp/harness.hpp"
#include "gorp/metrics.hpp"
#include "gorp/run_config.hpp"
#include "gorp/tasks.hpp"

namespace {

std::string default_output_dir() {
    if (const char* env = std::getenv("GORP_OUT_DIR")) {
        return env;
    }
    return "gorp_out";
}

struct RunArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int cmd_run(const RunArgs& args) {
    gorp::RunConfig cfg = gorp::parse_run_config(args.config);
    if (args.seed_given) {
        cfg.seed = args.seed;
    }
    if (!args.out.empty()) {
        cfg.output_dir = args.out;
    } else if (cfg.output_dir.empty()) {
        cfg.output_dir = default_output_dir();
    }
    const gorp::MetricsReport report = gorp::run_continual(cfg);
    std::printf("method %s seed %llu tasks %zu\n", report.method.c_str(),
                static_cast<unsigned long long>(report.seed), report.num_tasks);
    std::printf("ACC %.6f BWT %.6f\n", report.final_acc, report.bwt);
    if (report.heldout_acc) {
        std::printf("HELDOUT %.6f\n", *report.heldout_acc);
    }
    std::printf("report written to %s\n",
                (std::filesystem::path(cfg.output_dir) / "report.txt").string().c_str());
    return 0;
}

struct CompareArgs {
    std::vector<std::string> configs;
    std::string out = "compare_out";
};

int cmd_compare(const CompareArgs& args) {
    std::vector<std::filesystem::path> paths(args.configs.begin(), args.configs.end());
    const auto rows = gorp::compare_runs(paths, args.out);
    std::printf("%-20s %-14s %-10s %-8s %-8s %-12s %-12s\n", "name", "method", "seed", "ACC",
                "BWT", "mean_PO", "mean_GO");
    for (const auto& row : rows) {
        std::printf("%-20s %-14s %-10llu %-8.4f %-8.4f %-12.6g %-12.6g\n", row.name.c_str(),
                    row.method.c_str(), static_cast<unsigned long long>(row.seed), row.acc,
                    row.bwt, row.mean_po, row.mean_go);
    }
    std::printf("table written to %s\n",
                (std::filesystem::path(args.out) / "compare.tsv").string().c_str());
    return 0;
}

struct GenArgs {
    std::string kind = "rotated";
    std::string out;
    std::string base;
    std::size_t num_tasks = 3;
    std::size_t train = 1000;
    std::size_t test = 500;
    std::size_t dim = 32;
    std::size_t classes = 4;
    double angle_step = 30.0;
    double sigma = 0.4;
    std::uint64_t seed = 0;
};

int cmd_gen_data(const GenArgs& args) {
    gorp::TaskSequence seq;
    if (args.kind == "rotated") {
        gorp::RotatedParams params;
        params.num_tasks = args.num_tasks;
        params.train_per_task = args.train;
        params.test_per_task = args.test;
        params.dim = args.dim;
        params.num_classes = args.classes;
        params.angle_step_deg = args.angle_step;
        params.noise_sigma = args.sigma;
        params.seed = args.seed;
        seq = gorp::gen_rotated(params);
    } else if (args.kind == "permuted") {
        if (args.base.empty()) {
            throw gorp::ConfigError("--kind permuted requires --base");
        }
        seq = gorp::gen_permuted(gorp::load_dataset(args.base), args.num_tasks, args.seed);
    } else {
        throw gorp::ConfigError("unknown --kind '" + args.kind + "'");
    }
    std::filesystem::create_directories(args.out);
    for (std::size_t k = 0; k < seq.tasks.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "task_%02zu.txt", k + 1);
        const auto path = std::filesystem::path(args.out) / name;
        gorp::save_dataset(seq.tasks[k], path);
        std::printf("wrote %s (%zu train / %zu test)\n", path.string().c_str(),
                    seq.tasks[k].train_labels.size(), seq.tasks[k].test_labels.size());
    }
    return 0;
}

int cmd_metrics(const std::string& report_path) {
    const gorp::MetricsReport report = gorp::load_report(report_path);
    std::printf("method %s seed %llu tasks %zu\n", report.method.c_str(),
                static_cast<unsigned long long>(report.seed), report.num_tasks);
    std::printf("ACC %.17g\n", report.final_acc);
    std::printf("BWT %.17g\n", report.bwt);
    if (report.heldout_acc) {
        std::printf("HELDOUT %.17g\n", *report.heldout_acc);
    }
    std::printf("mean_PO %.17g\n", gorp::mean_pairwise(report.po));
    std::printf("mean_GO %.17g\n", gorp::mean_pairwise(report.go));
    std::printf("accuracy matrix (task i after task j):\n");
    for (std::size_t i = 0; i < report.acc.size(); ++i) {
        std::printf("  task %zu:", i + 1);
        for (double a : report.acc[i]) {
            std::printf(" %.4f", a);
        }
        std::printf("\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continual-learning trainer with shared-subspace gradient projection"};
    app.require_subcommand(1);

    RunArgs run_args;
    CLI::App* run = app.add_subcommand("run", "train one configured method");
    run->add_option("--config", run_args.config, "config file path")->required();
    run->add_option("--seed", run_args.seed, "override the config seed");
    run->add_option("--out", run_args.out, "output directory");

    CompareArgs cmp_args;
    CLI::App* cmp = app.add_subcommand("compare", "run several configs on one task sequence");
    cmp->add_option("--configs", cmp_args.configs, "config file paths")->required()->expected(-2);
    cmp->add_option("--out", cmp_args.out, "output directory");

    GenArgs gen_args;
    CLI::App* gen = app.add_subcommand("gen-data", "generate synthetic task files");
    gen->add_option("--kind", gen_args.kind, "rotated|permuted");
    gen->add_option("--out", gen_args.out, "output directory")->required();
    gen->add_option("--base", gen_args.base, "base dataset (permuted)");
    gen->add_option("--num-tasks", gen_args.num_tasks, "number of tasks");
    gen->add_option("--train", gen_args.train, "train samples per task");
    gen->add_option("--test", gen_args.test, "test samples per task");
    gen->add_option("--dim", gen_args.dim, "feature dimension");
    gen->add_option("--classes", gen_args.classes, "class count");
    gen->add_option("--angle-step", gen_args.angle_step, "degrees of rotation per task");
    gen->add_option("--sigma", gen_args.sigma, "noise standard deviation");
    gen->add_option("--seed", gen_args.seed, "generator seed");

    std::string report_path;
    CLI::App* metrics = app.add_subcommand("metrics", "summarize a written report");
    metrics->add_option("--report", report_path, "report.txt path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) {
            run_args.seed_given = run->count("--seed") > 0;
            return cmd_run(run_args);
        }
        if (cmp->parsed()) {
            return cmd_compare(cmp_args);
        }
        if (gen->parsed()) {
            return cmd_gen_data(gen_args);
        }
        if (metrics->parsed()) {
            return cmd_metrics(report_path);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
