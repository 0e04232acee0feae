#include "gorp/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gorp/error.hpp"

namespace gorp {

std::string to_string(Method m) {
    switch (m) {
        case Method::gorp: return "gorp";
        case Method::seq_adam: return "seq_adam";
        case Method::seq_lora_adam: return "seq_lora_adam";
    }
    return "gorp";
}

Method method_from_string(const std::string& s) {
    if (s == "gorp") return Method::gorp;
    if (s == "seq_adam") return Method::seq_adam;
    if (s == "seq_lora_adam") return Method::seq_lora_adam;
    throw ConfigError("unknown method '" + s + "' (expected gorp|seq_adam|seq_lora_adam)");
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.model.input_dim = 32;
    cfg.model.num_classes = 4;
    cfg.model.layers = {
        LayerSpec{LayerKind::frozen_lora, 32, 64, 8, Activation::relu},
        LayerSpec{LayerKind::full_rank, 64, 64, 0, Activation::relu},
        LayerSpec{LayerKind::full_rank, 64, 4, 0, Activation::none},
    };
    return cfg;
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true|false, got '" + v + "'");
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) {
            throw std::invalid_argument(v);
        }
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        if (v.empty() || v[0] == '-') {  // stoull would silently wrap negatives
            throw std::invalid_argument(v);
        }
        std::size_t pos = 0;
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) {
            throw std::invalid_argument(v);
        }
        return x;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    }
}

// "kind:out_dim:activation" entries; in_dims chain from the input dim and
// LoRA ranks are applied afterwards from model.lora_rank.
std::vector<LayerSpec> parse_layers(const std::string& value) {
    std::vector<LayerSpec> layers;
    for (const std::string& item : split_list(value)) {
        std::stringstream ss(item);
        std::string kind, dim, act;
        if (!std::getline(ss, kind, ':') || !std::getline(ss, dim, ':') ||
            !std::getline(ss, act, ':')) {
            throw ConfigError("model.layers: expected kind:out_dim:activation, got '" + item +
                              "'");
        }
        LayerSpec spec;
        spec.kind = layer_kind_from_string(trim(kind));
        spec.out_dim = static_cast<std::size_t>(parse_u64(trim(dim), "model.layers"));
        spec.activation = activation_from_string(trim(act));
        layers.push_back(spec);
    }
    if (layers.empty()) {
        throw ConfigError("model.layers: no layers given");
    }
    return layers;
}

}  // namespace

RunConfig parse_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    RunConfig cfg = default_run_config();
    std::size_t lora_rank = 8;

    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"method", [&](const std::string& v) { cfg.method = method_from_string(v); }},
        {"seed", [&](const std::string& v) { cfg.seed = parse_u64(v, "seed"); }},
        {"epochs_per_task",
         [&](const std::string& v) {
             cfg.epochs_per_task = static_cast<std::size_t>(parse_u64(v, "epochs_per_task"));
         }},
        {"batch_size",
         [&](const std::string& v) {
             cfg.batch_size = static_cast<std::size_t>(parse_u64(v, "batch_size"));
         }},
        {"output_dir", [&](const std::string& v) { cfg.output_dir = v; }},
        {"eval_heldout",
         [&](const std::string& v) { cfg.eval_heldout = parse_bool(v, "eval_heldout"); }},
        {"model.input_dim",
         [&](const std::string& v) {
             cfg.model.input_dim = static_cast<std::size_t>(parse_u64(v, "model.input_dim"));
         }},
        {"model.classes",
         [&](const std::string& v) {
             cfg.model.num_classes = static_cast<std::size_t>(parse_u64(v, "model.classes"));
         }},
        {"model.lora_rank",
         [&](const std::string& v) {
             lora_rank = static_cast<std::size_t>(parse_u64(v, "model.lora_rank"));
         }},
        {"model.layers",
         [&](const std::string& v) { cfg.model.layers = parse_layers(v); }},
        {"opt.lr_lora", [&](const std::string& v) { cfg.opt.lr_lora = parse_double(v, "opt.lr_lora"); }},
        {"opt.lr_full", [&](const std::string& v) { cfg.opt.lr_full = parse_double(v, "opt.lr_full"); }},
        {"opt.scale", [&](const std::string& v) { cfg.opt.scale = parse_double(v, "opt.scale"); }},
        {"opt.beta1", [&](const std::string& v) { cfg.opt.beta1 = parse_double(v, "opt.beta1"); }},
        {"opt.beta2", [&](const std::string& v) { cfg.opt.beta2 = parse_double(v, "opt.beta2"); }},
        {"opt.eps", [&](const std::string& v) { cfg.opt.adam_eps = parse_double(v, "opt.eps"); }},
        {"opt.rank",
         [&](const std::string& v) {
             cfg.opt.rank = static_cast<std::size_t>(parse_u64(v, "opt.rank"));
         }},
        {"opt.refresh_period",
         [&](const std::string& v) {
             cfg.opt.refresh_period = static_cast<std::size_t>(parse_u64(v, "opt.refresh_period"));
         }},
        {"opt.two_sided",
         [&](const std::string& v) { cfg.opt.two_sided = parse_bool(v, "opt.two_sided"); }},
        {"opt.identity_projection",
         [&](const std::string& v) {
             cfg.opt.identity_projection = parse_bool(v, "opt.identity_projection");
         }},
        {"opt.bias_correction",
         [&](const std::string& v) {
             cfg.opt.bias_correction = parse_bool(v, "opt.bias_correction");
         }},
        {"space.threshold",
         [&](const std::string& v) {
             cfg.opt.subspace.threshold = parse_double(v, "space.threshold");
         }},
        {"space.capacity",
         [&](const std::string& v) {
             cfg.opt.subspace.capacity = static_cast<std::size_t>(parse_u64(v, "space.capacity"));
         }},
        {"space.drop_tol",
         [&](const std::string& v) {
             cfg.opt.subspace.drop_tol = parse_double(v, "space.drop_tol");
         }},
        {"tasks.kind", [&](const std::string& v) { cfg.tasks.kind = v; }},
        {"tasks.num_tasks",
         [&](const std::string& v) {
             cfg.tasks.num_tasks = static_cast<std::size_t>(parse_u64(v, "tasks.num_tasks"));
         }},
        {"tasks.train_per_task",
         [&](const std::string& v) {
             cfg.tasks.train_per_task =
                 static_cast<std::size_t>(parse_u64(v, "tasks.train_per_task"));
         }},
        {"tasks.test_per_task",
         [&](const std::string& v) {
             cfg.tasks.test_per_task =
                 static_cast<std::size_t>(parse_u64(v, "tasks.test_per_task"));
         }},
        {"tasks.angle_step_deg",
         [&](const std::string& v) {
             cfg.tasks.angle_step_deg = parse_double(v, "tasks.angle_step_deg");
         }},
        {"tasks.noise_sigma",
         [&](const std::string& v) { cfg.tasks.noise_sigma = parse_double(v, "tasks.noise_sigma"); }},
        {"tasks.seed", [&](const std::string& v) { cfg.tasks.seed = parse_u64(v, "tasks.seed"); }},
        {"tasks.base_file", [&](const std::string& v) { cfg.tasks.base_file = v; }},
        {"tasks.files", [&](const std::string& v) { cfg.tasks.files = split_list(v); }},
    };

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": unknown key '" +
                              key + "'");
        }
        try {
            it->second(value);
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }

    // chain in_dims and apply the LoRA rank
    std::size_t expect = cfg.model.input_dim;
    for (LayerSpec& layer : cfg.model.layers) {
        layer.in_dim = expect;
        expect = layer.out_dim;
        if (layer.kind == LayerKind::frozen_lora) {
            layer.lora_rank = lora_rank;
        }
    }
    validate(cfg);
    return cfg;
}

void validate(const RunConfig& cfg) {
    validate(cfg.model);
    validate(cfg.opt);
    if (cfg.batch_size == 0 || cfg.epochs_per_task == 0) {
        throw ConfigError("batch_size and epochs_per_task must be >= 1");
    }
    if (cfg.method == Method::seq_lora_adam) {
        const bool has_lora =
            std::any_of(cfg.model.layers.begin(), cfg.model.layers.end(),
                        [](const LayerSpec& l) { return l.kind == LayerKind::frozen_lora; });
        if (!has_lora) {
            throw ConfigError("seq_lora_adam needs at least one lora layer");
        }
    }
    if (cfg.tasks.kind == "rotated") {
        if (cfg.tasks.num_tasks == 0 || cfg.tasks.train_per_task == 0 ||
            cfg.tasks.test_per_task == 0) {
            throw ConfigError("tasks: counts must be >= 1");
        }
    } else if (cfg.tasks.kind == "permuted") {
        if (cfg.tasks.base_file.empty()) {
            throw ConfigError("tasks.kind = permuted requires tasks.base_file");
        }
    } else if (cfg.tasks.kind == "files") {
        if (cfg.tasks.files.empty()) {
            throw ConfigError("tasks.kind = files requires tasks.files");
        }
    } else {
        throw ConfigError("unknown tasks.kind '" + cfg.tasks.kind +
                          "' (expected rotated|permuted|files)");
    }
}

std::string task_signature(const RunConfig& cfg) {
    std::ostringstream out;
    const std::uint64_t seed = cfg.tasks.seed.value_or(cfg.seed);
    out << "kind=" << cfg.tasks.kind;
    if (cfg.tasks.kind == "rotated") {
        char buf[64];
        std::snprintf(buf, sizeof buf, ";angle=%.17g;sigma=%.17g", cfg.tasks.angle_step_deg,
                      cfg.tasks.noise_sigma);
        out << ";num=" << cfg.tasks.num_tasks << ";train=" << cfg.tasks.train_per_task
            << ";test=" << cfg.tasks.test_per_task << buf << ";seed=" << seed
            << ";dim=" << cfg.model.input_dim << ";classes=" << cfg.model.num_classes;
    } else if (cfg.tasks.kind == "permuted") {
        out << ";base=" << cfg.tasks.base_file << ";num=" << cfg.tasks.num_tasks
            << ";seed=" << seed;
    } else {
        out << ";files=";
        for (const std::string& f : cfg.tasks.files) {
            out << f << ",";
        }
    }
    out << ";heldout=" << (cfg.eval_heldout ? 1 : 0);
    return out.str();
}

ResolvedTasks resolve_tasks(const RunConfig& cfg) {
    ResolvedTasks resolved;
    const std::uint64_t seed = cfg.tasks.seed.value_or(cfg.seed);
    const std::size_t extra = cfg.eval_heldout ? 1 : 0;

    if (cfg.tasks.kind == "rotated") {
        RotatedParams params;
        params.num_tasks = cfg.tasks.num_tasks + extra;
        params.train_per_task = cfg.tasks.train_per_task;
        params.test_per_task = cfg.tasks.test_per_task;
        params.dim = cfg.model.input_dim;
        params.num_classes = cfg.model.num_classes;
        params.angle_step_deg = cfg.tasks.angle_step_deg;
        params.noise_sigma = cfg.tasks.noise_sigma;
        params.seed = seed;
        resolved.sequence = gen_rotated(params);
    } else if (cfg.tasks.kind == "permuted") {
        const TaskDataset base = load_dataset(cfg.tasks.base_file);
        resolved.sequence = gen_permuted(base, cfg.tasks.num_tasks + extra, seed);
    } else {
        if (cfg.eval_heldout && cfg.tasks.files.size() < 2) {
            throw ConfigError("eval_heldout with tasks.kind = files needs an extra file");
        }
        for (const std::string& f : cfg.tasks.files) {
            resolved.sequence.tasks.push_back(load_dataset(f));
        }
        resolved.sequence.order_label = "files";
        validate(resolved.sequence);
    }

    if (cfg.eval_heldout) {
        resolved.heldout = std::move(resolved.sequence.tasks.back());
        resolved.sequence.tasks.pop_back();
    }

    for (const TaskDataset& task : resolved.sequence.tasks) {
        if (task.dim() != cfg.model.input_dim || task.num_classes != cfg.model.num_classes) {
            throw ConfigError("task '" + task.name + "' is " + std::to_string(task.dim()) +
                              "-dim/" + std::to_string(task.num_classes) +
                              "-class but the model expects " + std::to_string(cfg.model.input_dim) +
                              "/" + std::to_string(cfg.model.num_classes));
        }
    }
    return resolved;
}

}  // namespace gorp
