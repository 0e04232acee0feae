#include "gorp/harness.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>

#include "gorp/error.hpp"
#include "gorp/linalg.hpp"
#include "gorp/rng.hpp"
#include "gorp/subspace.hpp"

namespace gorp {

namespace {

std::unique_ptr<Optimizer> make_optimizer(const Model& model, const RunConfig& cfg) {
    switch (cfg.method) {
        case Method::gorp:
            return std::make_unique<GorpOptimizer>(model, cfg.opt);
        case Method::seq_adam:
            return std::make_unique<PlainAdamOptimizer>(model, cfg.opt, AdamScope::all_params);
        case Method::seq_lora_adam:
            return std::make_unique<PlainAdamOptimizer>(model, cfg.opt, AdamScope::lora_only);
    }
    throw ConfigError("unhandled method");
}

void train_one_task(Model& model, Optimizer& opt, const TaskDataset& task, const RunConfig& cfg,
                    std::size_t task_index, std::vector<double>& loss_trace) {
    const std::size_t n = task.train_labels.size();
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(mix_seed(cfg.seed, 0x737465 + task_index * 4096 + epoch));
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            Batch batch;
            batch.inputs = Matrix(stop - start, task.dim());
            batch.labels.resize(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t src = order[i];
                batch.labels[i - start] = task.train_labels[src];
                for (std::size_t j = 0; j < task.dim(); ++j) {
                    batch.inputs(i - start, j) = task.train_inputs(src, j);
                }
            }
            const auto [loss, cache] = forward(model, batch);
            opt.step(model, backward(model, cache, batch));
            loss_trace.push_back(loss);
        }
    }
}

void persist_run(const MetricsReport& report, const RunConfig& cfg, const Optimizer& opt,
                 const Model& model) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    save_report(report, dir / "report.txt");

    {
        std::ofstream out(dir / "loss_trace.txt");
        char buf[40];
        for (std::size_t task = 0; task < report.loss_trace.size(); ++task) {
            for (std::size_t step = 0; step < report.loss_trace[task].size(); ++step) {
                std::snprintf(buf, sizeof buf, "%.17g", report.loss_trace[task][step]);
                out << task + 1 << " " << step + 1 << " " << buf << "\n";
            }
        }
    }
    {
        std::ofstream out(dir / "timing.txt");
        char buf[40];
        for (std::size_t task = 0; task < report.task_seconds.size(); ++task) {
            std::snprintf(buf, sizeof buf, "%.6f", report.task_seconds[task]);
            out << task + 1 << " " << buf << "\n";
        }
    }
    if (const auto* gorp_opt = dynamic_cast<const GorpOptimizer*>(&opt)) {
        for (std::size_t i = 0; i < model.num_layers(); ++i) {
            save_space(gorp_opt->space(i), dir / ("space_layer" + std::to_string(i) + ".txt"));
        }
    }
}

}  // namespace

MetricsReport run_continual(const RunConfig& cfg) {
    validate(cfg);
    const ResolvedTasks resolved = resolve_tasks(cfg);
    const TaskSequence& seq = resolved.sequence;
    const std::size_t num_tasks = seq.tasks.size();

    Model model = init_model(cfg.model, cfg.seed);
    std::unique_ptr<Optimizer> opt = make_optimizer(model, cfg);

    std::vector<std::size_t> lora_layers;
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        if (model.layer(i).kind == LayerKind::frozen_lora) {
            lora_layers.push_back(i);
        }
    }

    MetricsReport report;
    report.method = to_string(cfg.method);
    report.seed = cfg.seed;
    report.num_tasks = num_tasks;
    report.acc.resize(num_tasks);
    report.loss_trace.resize(num_tasks);

    std::vector<std::vector<Matrix>> a_snapshots(num_tasks);
    std::vector<std::vector<Matrix>> moment_snapshots(num_tasks);

    for (std::size_t k = 0; k < num_tasks; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        train_one_task(model, *opt, seq.tasks[k], cfg, k, report.loss_trace[k]);

        for (std::size_t i = 0; i <= k; ++i) {
            report.acc[i].push_back(
                evaluate(model, seq.tasks[i].test_inputs, seq.tasks[i].test_labels));
        }
        for (std::size_t li : lora_layers) {
            a_snapshots[k].push_back(model.layer(li).a);
            const Matrix* moment = opt->first_moment_a(li);
            moment_snapshots[k].push_back(moment != nullptr ? *moment
                                                            : Matrix(model.layer(li).a.rows(),
                                                                     model.layer(li).a.cols()));
        }
        opt->end_task(model);
        report.task_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    if (resolved.heldout) {
        report.heldout_acc =
            evaluate(model, resolved.heldout->test_inputs, resolved.heldout->test_labels);
    }
    report.max_ortho_residual = opt->max_ortho_residual();
    fill_metrics(report, a_snapshots, moment_snapshots);

    if (!cfg.output_dir.empty()) {
        persist_run(report, cfg, *opt, model);
    }
    return report;
}

std::vector<CompareRow> compare_runs(const std::vector<std::filesystem::path>& config_paths,
                                     const std::filesystem::path& out_dir) {
    if (config_paths.size() < 2) {
        throw UsageError("compare needs at least two configs");
    }
    std::vector<RunConfig> cfgs;
    for (const auto& path : config_paths) {
        cfgs.push_back(parse_run_config(path));
    }
    const std::string signature = task_signature(cfgs.front());
    for (std::size_t i = 1; i < cfgs.size(); ++i) {
        if (task_signature(cfgs[i]) != signature) {
            throw UsageError("configs do not share a task sequence:\n  " + signature + "\n  " +
                             task_signature(cfgs[i]));
        }
    }

    std::filesystem::create_directories(out_dir);
    std::vector<CompareRow> rows;
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        RunConfig cfg = cfgs[i];
        cfg.output_dir.clear();  // compare owns the output layout
        const MetricsReport report = run_continual(cfg);

        CompareRow row;
        row.name = config_paths[i].stem().string();
        row.method = report.method;
        row.seed = report.seed;
        row.acc = report.final_acc;
        row.bwt = report.bwt;
        row.mean_po = mean_pairwise(report.po);
        row.mean_go = mean_pairwise(report.go);
        rows.push_back(row);

        char buf[40];
        std::ofstream out(out_dir / ("go_" + row.name + ".txt"));
        for (std::size_t r = 0; r < report.go.rows(); ++r) {
            for (std::size_t c = 0; c < report.go.cols(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", report.go(r, c));
                out << (c ? " " : "") << buf;
            }
            out << "\n";
        }
    }
    write_compare_table(rows, out_dir / "compare.tsv");
    return rows;
}

void write_compare_table(const std::vector<CompareRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path.string());
    }
    out << "name\tmethod\tseed\tACC\tBWT\tmean_PO\tmean_GO\n";
    char buf[160];
    for (const CompareRow& row : rows) {
        std::snprintf(buf, sizeof buf, "%s\t%s\t%llu\t%.6f\t%.6f\t%.9g\t%.9g\n", row.name.c_str(),
                      row.method.c_str(), static_cast<unsigned long long>(row.seed), row.acc,
                      row.bwt, row.mean_po, row.mean_go);
        out << buf;
    }
}

}  // namespace gorp
