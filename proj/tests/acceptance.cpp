// Acceptance suite: runs every shipping criterion at its stated tolerance and
// prints one [PASS]/[FAIL] line per criterion. Exits nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gorp/harness.hpp"
#include "gorp/linalg.hpp"
#include "gorp/metrics.hpp"
#include "gorp/net.hpp"
#include "gorp/optimizer.hpp"
#include "gorp/ref_kernels.hpp"
#include "gorp/rng.hpp"
#include "gorp/run_config.hpp"
#include "gorp/subspace.hpp"
#include "gorp/tasks.hpp"

using namespace gorp;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail, double seconds,
            double budget_seconds) {
    const bool in_budget = seconds < budget_seconds;
    const bool ok = pass && in_budget;
    if (!ok) {
        ++g_failures;
    }
    std::printf("[%s] criterion %d: %s (%.2fs, budget %.0fs)\n", ok ? "PASS" : "FAIL", criterion,
                detail.c_str(), seconds, budget_seconds);
    std::fflush(stdout);
}

struct Timer {
    Clock::time_point t0 = Clock::now();
    double seconds() const { return std::chrono::duration<double>(Clock::now() - t0).count(); }
};

Matrix rand_matrix(Rng& rng, std::size_t m, std::size_t n) {
    Matrix out(m, n);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data()[i] = rng.gauss();
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

fs::path out_dir() {
    const fs::path dir = fs::temp_directory_path() / "gorp_acceptance";
    fs::create_directories(dir);
    return dir;
}

// --------------------------------------------------------------------------
// 1. GORP with identity projection, empty spaces and alpha=1 must reproduce a
//    reference plain-Adam trajectory to 1e-12 per weight entry over 100 steps.

void criterion_1() {
    Timer timer;
    ModelSpec spec;
    spec.input_dim = 8;
    spec.num_classes = 4;
    spec.layers = {
        LayerSpec{LayerKind::frozen_lora, 8, 12, 4, Activation::tanh},
        LayerSpec{LayerKind::full_rank, 12, 4, 0, Activation::none},
    };
    Model model_gorp = init_model(spec, 2024);
    Model model_ref = init_model(spec, 2024);

    GorpConfig cfg;
    cfg.lr_lora = 1e-3;
    cfg.lr_full = 1e-3;
    cfg.scale = 1.0;
    cfg.identity_projection = true;
    cfg.subspace.capacity = 0;
    GorpOptimizer opt(model_gorp, cfg);

    Matrix m_a(12, 4), v_a(12, 4), m_b(4, 8), v_b(4, 8), m_w(4, 12), v_w(4, 12);

    Rng rng(501);
    double worst = 0.0;
    for (int step = 0; step < 100; ++step) {
        Batch batch;
        batch.inputs = rand_matrix(rng, 8, 8);
        batch.labels.resize(8);
        for (auto& y : batch.labels) {
            y = static_cast<int>(rng.below(4));
        }

        const auto [loss_g, cache_g] = forward(model_gorp, batch);
        opt.step(model_gorp, backward(model_gorp, cache_g, batch));

        const auto [loss_r, cache_r] = forward(model_ref, batch);
        const GradientSet grads = backward(model_ref, cache_r, batch);
        ref::adam_update_moments(m_a, v_a, grads.layers[0].a, cfg.beta1, cfg.beta2);
        ref::adam_update_moments(m_b, v_b, grads.layers[0].b, cfg.beta1, cfg.beta2);
        ref::adam_update_moments(m_w, v_w, grads.layers[1].w, cfg.beta1, cfg.beta2);
        Layer& l0 = model_ref.mutable_layer(0);
        axpy(-cfg.lr_lora, ref::adam_direction(m_a, v_a, cfg.adam_eps), l0.a);
        axpy(-cfg.lr_lora, ref::adam_direction(m_b, v_b, cfg.adam_eps), l0.b);
        Layer& l1 = model_ref.mutable_layer(1);
        axpy(-cfg.lr_full, ref::adam_direction(m_w, v_w, cfg.adam_eps), l1.w);

        worst = std::max(worst, max_abs_diff(model_gorp.layer(0).a, model_ref.layer(0).a));
        worst = std::max(worst, max_abs_diff(model_gorp.layer(0).b, model_ref.layer(0).b));
        worst = std::max(worst, max_abs_diff(model_gorp.layer(1).w, model_ref.layer(1).w));
    }
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "Adam reduction over 100 steps, max weight deviation %.3g (tol 1e-12)", worst);
    report(1, worst <= 1e-12, detail, timer.seconds(), 5.0);
}

// --------------------------------------------------------------------------
// 2. Analytic gradients vs central finite differences on 20 random
//    configurations, max relative error <= 1e-5.

double fd_error(Model& model, const Batch& batch) {
    const auto [loss, cache] = forward(model, batch);
    const GradientSet grads = backward(model, cache, batch);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t li = 0; li < model.num_layers(); ++li) {
        std::vector<std::pair<Matrix*, const Matrix*>> mats;
        Layer& layer = model.mutable_layer(li);
        if (layer.kind == LayerKind::full_rank) {
            mats.emplace_back(&layer.w, &grads.layers[li].w);
        } else {
            mats.emplace_back(&layer.a, &grads.layers[li].a);
            mats.emplace_back(&layer.b, &grads.layers[li].b);
        }
        for (auto [param, grad] : mats) {
            for (std::size_t i = 0; i < param->size(); ++i) {
                const double saved = param->data()[i];
                param->data()[i] = saved + h;
                const double up = forward(model, batch).first;
                param->data()[i] = saved - h;
                const double down = forward(model, batch).first;
                param->data()[i] = saved;
                const double fd = (up - down) / (2.0 * h);
                const double an = grad->data()[i];
                worst = std::max(worst,
                                 std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)}));
            }
        }
    }
    return worst;
}

void criterion_2() {
    Timer timer;
    Rng rng(502);
    double worst = 0.0;
    for (int it = 0; it < 20; ++it) {
        const std::size_t d = 3 + rng.below(5);
        const std::size_t classes = 2 + rng.below(3);
        const std::size_t hidden = 3 + rng.below(6);
        const Activation act = rng.uniform() < 0.5 ? Activation::tanh : Activation::none;
        ModelSpec spec;
        spec.input_dim = d;
        spec.num_classes = classes;
        if (rng.uniform() < 0.5) {
            const std::size_t r = 1 + rng.below(std::min(hidden, d));
            spec.layers = {LayerSpec{LayerKind::frozen_lora, d, hidden, r, act},
                           LayerSpec{LayerKind::full_rank, hidden, classes, 0, Activation::none}};
        } else {
            spec.layers = {LayerSpec{LayerKind::full_rank, d, hidden, 0, act},
                           LayerSpec{LayerKind::frozen_lora, hidden, classes, 1 + rng.below(2),
                                     Activation::none}};
        }
        Model model = init_model(spec, 1000 + static_cast<std::uint64_t>(it));
        // move LoRA factors off their zero init so both factor gradients are live
        for (std::size_t li = 0; li < model.num_layers(); ++li) {
            Layer& layer = model.mutable_layer(li);
            if (layer.kind == LayerKind::frozen_lora) {
                for (std::size_t i = 0; i < layer.b.size(); ++i) {
                    layer.b.data()[i] = 0.3 * rng.gauss();
                }
            }
        }
        Batch batch;
        const std::size_t n = 1 + rng.below(5);
        batch.inputs = rand_matrix(rng, n, d);
        batch.labels.resize(n);
        for (auto& y : batch.labels) {
            y = static_cast<int>(rng.below(classes));
        }
        worst = std::max(worst, fd_error(model, batch));
    }
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "gradient check on 20 random configurations, max rel err %.3g (tol 1e-5)",
                  worst);
    report(2, worst <= 1e-5, detail, timer.seconds(), 30.0);
}

// --------------------------------------------------------------------------
// 3. SVD on 1000 random matrices up to 64x64: reconstruction <= 1e-8
//    relative, orthonormality <= 1e-10, singular values nonincreasing.

void criterion_3() {
    Timer timer;
    Rng rng(503);
    double worst_recon = 0.0;
    double worst_ortho = 0.0;
    bool sorted_ok = true;
    for (int it = 0; it < 1000; ++it) {
        const std::size_t m = 1 + rng.below(64);
        const std::size_t n = 1 + rng.below(64);
        Matrix a = rand_matrix(rng, m, n);
        if (it % 5 == 0 && n >= 2) {
            for (std::size_t i = 0; i < m; ++i) {
                a(i, n - 1) = 2.0 * a(i, 0);  // force rank deficiency
            }
        }
        const SvdResult svd = thin_svd(a);
        for (std::size_t j = 0; j + 1 < svd.singular_values.size(); ++j) {
            sorted_ok = sorted_ok && svd.singular_values[j] >= svd.singular_values[j + 1];
        }
        sorted_ok = sorted_ok && svd.singular_values.back() >= 0.0;

        Matrix us = svd.u;
        for (std::size_t i = 0; i < us.rows(); ++i) {
            for (std::size_t j = 0; j < us.cols(); ++j) {
                us(i, j) *= svd.singular_values[j];
            }
        }
        const Matrix recon = matmul(us, svd.vt);
        double err2 = 0.0;
        double ref2 = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = recon.data()[i] - a.data()[i];
            err2 += d * d;
            ref2 += a.data()[i] * a.data()[i];
        }
        worst_recon = std::max(worst_recon, ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2));

        const Matrix gram_u = matmul_at_b(svd.u, svd.u);
        const Matrix gram_v = matmul_a_bt(svd.vt, svd.vt);
        for (std::size_t i = 0; i < gram_u.rows(); ++i) {
            for (std::size_t j = 0; j < gram_u.cols(); ++j) {
                worst_ortho = std::max(
                    worst_ortho, std::abs(gram_u(i, j) - (i == j ? 1.0 : 0.0)));
            }
        }
        for (std::size_t i = 0; i < gram_v.rows(); ++i) {
            for (std::size_t j = 0; j < gram_v.cols(); ++j) {
                worst_ortho = std::max(
                    worst_ortho, std::abs(gram_v(i, j) - (i == j ? 1.0 : 0.0)));
            }
        }
    }
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "1000 SVDs: recon %.3g (tol 1e-8), orthonormality %.3g (tol 1e-10), sorted %s",
                  worst_recon, worst_ortho, sorted_ok ? "yes" : "NO");
    report(3, worst_recon <= 1e-8 && worst_ortho <= 1e-10 && sorted_ok, detail, timer.seconds(),
           60.0);
}

// --------------------------------------------------------------------------
// 4. krank_select equals brute-force minimal k on 100 random spectra.

void criterion_4() {
    Timer timer;
    Rng rng(504);
    bool all_match = true;
    const std::vector<double> hand{4.0, 2.0, 1.0};
    all_match = all_match && krank_select(hand, 21.0, 0.0, 0.8) == 2;
    for (int it = 0; it < 100; ++it) {
        const std::size_t len = 1 + rng.below(16);
        std::vector<double> s(len);
        for (double& x : s) {
            x = std::abs(rng.gauss()) + 1e-3;
        }
        std::sort(s.rbegin(), s.rend());
        double sum2 = 0.0;
        for (double x : s) {
            sum2 += x * x;
        }
        const double carried = rng.uniform() < 0.25 ? 0.0 : 0.5 * rng.uniform() * sum2;
        const double total = sum2 + carried + 0.1 * rng.uniform();
        const double threshold = 0.05 + 0.95 * rng.uniform();

        const std::size_t got = krank_select(s, total, carried, threshold);
        std::size_t want = s.size();
        for (std::size_t k = 0; k <= s.size(); ++k) {
            double captured = carried;
            for (std::size_t i = 0; i < k; ++i) {
                captured += s[i] * s[i];
            }
            if (captured >= threshold * total) {
                want = k;
                break;
            }
        }
        all_match = all_match && got == want;
    }
    report(4, all_match, "k-rank selection equals exhaustive search on 100 spectra + hand case",
           timer.seconds(), 1.0);
}

// --------------------------------------------------------------------------
// 5-7. Paired default runs over 5 seeds: orthogonality invariant, forgetting
//      reduction and gradient-overlap reduction.

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return values[values.size() / 2];
}

void criteria_5_6_7() {
    Timer timer;
    const std::vector<std::uint64_t> seeds{17, 18, 19, 20, 21};
    std::vector<MetricsReport> gorp_runs, seq_runs, lora_runs;
    for (std::uint64_t seed : seeds) {
        RunConfig cfg = default_run_config();
        cfg.seed = seed;
        cfg.method = Method::gorp;
        gorp_runs.push_back(run_continual(cfg));
        cfg.method = Method::seq_adam;
        seq_runs.push_back(run_continual(cfg));
        cfg.method = Method::seq_lora_adam;
        lora_runs.push_back(run_continual(cfg));
    }
    const double elapsed = timer.seconds();

    // 5: every projected gradient stayed orthogonal to its shared space, at
    //    every step of every gorp run (the optimizer tracks the worst case).
    double worst_residual = 0.0;
    bool engaged = true;
    for (const MetricsReport& r : gorp_runs) {
        worst_residual = std::max(worst_residual, r.max_ortho_residual);
        engaged = engaged && r.max_ortho_residual > 0.0;  // spaces were live in tasks 2+
    }
    char d5[200];
    std::snprintf(d5, sizeof d5,
                  "orthogonality invariant across 5 gorp runs, max residual %.3g (tol 1e-8)",
                  worst_residual);
    report(5, worst_residual <= 1e-8 && engaged, d5, elapsed, 120.0);

    // 6: median forgetting comparison at the defaults.
    std::vector<double> gorp_bwt, seq_bwt;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        gorp_bwt.push_back(gorp_runs[i].bwt);
        seq_bwt.push_back(seq_runs[i].bwt);
    }
    const double mg = median(gorp_bwt);
    const double ms = median(seq_bwt);
    const bool less_forgetting = mg > ms && std::abs(mg) <= 0.5 * std::abs(ms);
    char d6[200];
    std::snprintf(d6, sizeof d6,
                  "median BWT gorp %+.3f vs seq_adam %+.3f (need greater and |.| <= half)", mg,
                  ms);
    report(6, less_forgetting, d6, elapsed, 120.0);

    // 7: median mean pairwise gradient overlap, gorp vs unprotected LoRA.
    std::vector<double> gorp_go, lora_go;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        gorp_go.push_back(mean_pairwise(gorp_runs[i].go));
        lora_go.push_back(mean_pairwise(lora_runs[i].go));
    }
    const double g_go = median(gorp_go);
    const double l_go = median(lora_go);
    char d7[200];
    std::snprintf(d7, sizeof d7, "median mean-GO gorp %.3g vs seq_lora_adam %.3g (need <=)", g_go,
                  l_go);
    report(7, g_go <= l_go, d7, elapsed, 120.0);
}

// --------------------------------------------------------------------------
// 8. Rank sweep: the projector rank sweep runs at r in {4, 8, 16, 32} and
//    emits a comparison table; no ordering is asserted.

void criterion_8() {
    Timer timer;
    const std::vector<std::size_t> ranks{4, 8, 16, 32};
    std::vector<double> accs;
    const fs::path table_path = out_dir() / "rank_sweep.tsv";
    {
        std::ofstream table(table_path);
        table << "rank\tACC\tBWT\n";
        for (std::size_t r : ranks) {
            RunConfig cfg = default_run_config();
            cfg.seed = 17;
            cfg.opt.rank = r;
            const MetricsReport report_r = run_continual(cfg);
            accs.push_back(report_r.final_acc);
            char buf[80];
            std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\n", r, report_r.final_acc,
                          report_r.bwt);
            table << buf;
        }
    }
    bool ok = accs.size() == ranks.size();
    for (double a : accs) {
        ok = ok && a >= 0.0 && a <= 1.0 && std::isfinite(a);
    }
    // the emitted table must parse back with one row per rank
    std::ifstream check(table_path);
    std::string line;
    std::getline(check, line);
    std::size_t rows = 0;
    while (std::getline(check, line)) {
        ++rows;
    }
    ok = ok && rows == ranks.size();
    char detail[240];
    std::snprintf(detail, sizeof detail,
                  "rank sweep ACC: r=4 %.3f, r=8 %.3f, r=16 %.3f, r=32 %.3f (table %s)", accs[0],
                  accs[1], accs[2], accs[3], table_path.string().c_str());
    report(8, ok, detail, timer.seconds(), 300.0);
}

// --------------------------------------------------------------------------
// 9. Metric formulas on hard-coded inputs, exact.

void criterion_9() {
    Timer timer;
    bool ok = true;

    MetricsReport hand;
    hand.method = "gorp";
    hand.num_tasks = 2;
    hand.acc = {{0.9, 0.8}, {0.7}};
    fill_metrics(hand, {}, {});
    ok = ok && hand.final_acc == (0.8 + 0.7) / 2.0;
    ok = ok && hand.bwt == (0.8 - 0.9) / 1.0;

    // PO of column-orthogonal snapshots is 0; of identical orthonormal m x r
    // snapshots it is r.
    Matrix e1(4, 2), e2(4, 2);
    e1(0, 0) = 1.0;
    e1(1, 1) = 1.0;
    e2(2, 0) = 1.0;
    e2(3, 1) = 1.0;
    ok = ok && overlap_sq(e1, e2) == 0.0;
    ok = ok && overlap_sq(e1, e1) == 2.0;

    // GO formula against a hand product: x^T y = [[2,0],[0,0]], squared 4.
    Matrix x(2, 2), y(2, 2);
    x(0, 0) = 1.0;
    x(1, 1) = 1.0;
    y(0, 0) = 2.0;
    ok = ok && overlap_sq(x, y) == 4.0;

    MetricsReport single;
    single.method = "gorp";
    single.num_tasks = 1;
    single.acc = {{0.625}};
    fill_metrics(single, {}, {});
    ok = ok && single.bwt == 0.0 && single.final_acc == 0.625;

    report(9, ok, "ACC/BWT/PO/GO formulas match hand computation exactly", timer.seconds(), 1.0);
}

// --------------------------------------------------------------------------
// 10. Determinism and I/O round-trips.

void criterion_10() {
    Timer timer;
    RunConfig cfg = default_run_config();
    cfg.seed = 33;
    cfg.tasks.train_per_task = 200;
    cfg.tasks.test_per_task = 100;
    cfg.output_dir = (out_dir() / "det_a").string();
    run_continual(cfg);
    cfg.output_dir = (out_dir() / "det_b").string();
    run_continual(cfg);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    const std::string a = slurp(out_dir() / "det_a" / "report.txt");
    const std::string b = slurp(out_dir() / "det_b" / "report.txt");
    const bool reports_identical = !a.empty() && a == b;

    RotatedParams params;
    params.num_tasks = 1;
    params.train_per_task = 64;
    params.test_per_task = 32;
    params.dim = 16;
    params.num_classes = 4;
    params.seed = 9;
    const TaskSequence seq = gen_rotated(params);
    const fs::path data_path = out_dir() / "roundtrip.txt";
    save_dataset(seq.tasks[0], data_path);
    const TaskDataset loaded = load_dataset(data_path);
    const bool dataset_identical = loaded.train_inputs == seq.tasks[0].train_inputs &&
                                   loaded.train_labels == seq.tasks[0].train_labels &&
                                   loaded.test_inputs == seq.tasks[0].test_inputs &&
                                   loaded.test_labels == seq.tasks[0].test_labels;
    char detail[160];
    std::snprintf(detail, sizeof detail, "report bytes identical: %s; dataset round-trip: %s",
                  reports_identical ? "yes" : "NO", dataset_identical ? "yes" : "NO");
    report(10, reports_identical && dataset_identical, detail, timer.seconds(), 10.0);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criteria_5_6_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
