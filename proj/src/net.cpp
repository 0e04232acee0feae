#include "gorp/net.hpp"

#include <cmath>

#include "gorp/error.hpp"
#include "gorp/linalg.hpp"
#include "gorp/rng.hpp"

namespace gorp {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::none: return "none";
    }
    return "none";
}

std::string to_string(LayerKind k) {
    return k == LayerKind::full_rank ? "full" : "lora";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "none") return Activation::none;
    throw ConfigError("unknown activation '" + s + "' (expected relu|tanh|none)");
}

LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "full") return LayerKind::full_rank;
    if (s == "lora") return LayerKind::frozen_lora;
    throw ConfigError("unknown layer kind '" + s + "' (expected full|lora)");
}

void validate(const ModelSpec& spec) {
    if (spec.input_dim == 0 || spec.num_classes < 2 || spec.layers.empty()) {
        throw SpecError("model spec needs input_dim >= 1, num_classes >= 2 and >= 1 layer");
    }
    std::size_t expect = spec.input_dim;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.in_dim != expect) {
            throw SpecError("layer " + std::to_string(i) + " in_dim " + std::to_string(l.in_dim) +
                            " breaks the chain (expected " + std::to_string(expect) + ")");
        }
        if (l.out_dim == 0) {
            throw SpecError("layer " + std::to_string(i) + " has out_dim 0");
        }
        if (l.kind == LayerKind::frozen_lora) {
            if (l.lora_rank == 0 || l.lora_rank > std::min(l.out_dim, l.in_dim)) {
                throw SpecError("layer " + std::to_string(i) + " lora_rank " +
                                std::to_string(l.lora_rank) + " not in [1, min(" +
                                std::to_string(l.out_dim) + ", " + std::to_string(l.in_dim) + ")]");
            }
        }
        expect = l.out_dim;
    }
    if (expect != spec.num_classes) {
        throw SpecError("final layer out_dim " + std::to_string(expect) +
                        " must equal num_classes " + std::to_string(spec.num_classes));
    }
}

Matrix Layer::effective_weight() const {
    if (kind == LayerKind::full_rank) {
        return w;
    }
    Matrix eff = w0;
    axpy(1.0, matmul(a, b), eff);
    return eff;
}

namespace {

Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            out(i, j) = stddev * rng.gauss();
        }
    }
    return out;
}

double activate(Activation act, double z) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::none: return z;
    }
    return z;
}

// Derivative expressed through the already-computed activation value.
double activate_grad(Activation act, double z, double h) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - h * h;
        case Activation::none: return 1.0;
    }
    return 1.0;
}

}  // namespace

Model init_model(const ModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    Rng rng(mix_seed(seed, 0x6d6f64656c));
    std::vector<Layer> layers;
    layers.reserve(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& ls = spec.layers[i];
        Layer layer;
        layer.kind = ls.kind;
        layer.activation = ls.activation;
        layer.id = static_cast<int>(i);
        const double stddev = 1.0 / std::sqrt(static_cast<double>(ls.out_dim));
        if (ls.kind == LayerKind::full_rank) {
            layer.w = gaussian_matrix(rng, ls.out_dim, ls.in_dim, stddev);
        } else {
            layer.w0 = gaussian_matrix(rng, ls.out_dim, ls.in_dim, stddev);
            layer.a = gaussian_matrix(rng, ls.out_dim, ls.lora_rank, stddev);
            layer.b = Matrix(ls.lora_rank, ls.in_dim);
        }
        layers.push_back(std::move(layer));
    }
    return Model(spec, std::move(layers));
}

std::pair<double, ForwardCache> forward(const Model& model, const Batch& batch) {
    const ModelSpec& spec = model.spec();
    if (batch.inputs.cols() != spec.input_dim) {
        throw ShapeError("forward: batch inputs are " + shape_str(batch.inputs) +
                         ", model input_dim is " + std::to_string(spec.input_dim));
    }
    if (batch.inputs.rows() != batch.labels.size() || batch.labels.empty()) {
        throw DataError("forward: need a nonempty batch with one label per row");
    }
    const int classes = static_cast<int>(spec.num_classes);
    for (std::size_t s = 0; s < batch.labels.size(); ++s) {
        if (batch.labels[s] < 0 || batch.labels[s] >= classes) {
            throw DataError("forward: label " + std::to_string(batch.labels[s]) + " at row " +
                            std::to_string(s) + " outside [0, " + std::to_string(classes) + ")");
        }
    }

    ForwardCache cache;
    cache.model_version = model.version();
    cache.input = batch.inputs;
    cache.labels = batch.labels;

    Matrix h = batch.inputs;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const Layer& layer = model.layer(l);
        Matrix z = matmul_a_bt(h, layer.effective_weight());
        Matrix post(z.rows(), z.cols());
        for (std::size_t i = 0; i < z.rows(); ++i) {
            for (std::size_t j = 0; j < z.cols(); ++j) {
                post(i, j) = activate(layer.activation, z(i, j));
            }
        }
        cache.pre_act.push_back(std::move(z));
        cache.post_act.push_back(post);
        h = std::move(post);
    }

    // mean softmax cross-entropy via log-sum-exp
    const Matrix& logits = cache.post_act.back();
    double total = 0.0;
    for (std::size_t s = 0; s < logits.rows(); ++s) {
        double zmax = logits(s, 0);
        for (std::size_t c = 1; c < logits.cols(); ++c) {
            zmax = std::max(zmax, logits(s, c));
        }
        double sumexp = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            sumexp += std::exp(logits(s, c) - zmax);
        }
        total += zmax + std::log(sumexp) - logits(s, static_cast<std::size_t>(batch.labels[s]));
    }
    cache.loss = total / static_cast<double>(logits.rows());
    return {cache.loss, cache};
}

GradientSet backward(const Model& model, const ForwardCache& cache, const Batch& batch) {
    if (cache.model_version != model.version()) {
        throw UsageError("backward: stale cache (model changed since forward)");
    }
    if (cache.pre_act.size() != model.num_layers() || cache.labels.size() != batch.labels.size() ||
        !(cache.input == batch.inputs)) {
        throw UsageError("backward: cache does not match this batch");
    }
    const std::size_t n = cache.input.rows();
    const std::size_t num_layers = model.num_layers();
    const Matrix& logits = cache.post_act.back();

    // d loss / d logits = (softmax - onehot) / n
    Matrix delta(logits.rows(), logits.cols());
    for (std::size_t s = 0; s < logits.rows(); ++s) {
        double zmax = logits(s, 0);
        for (std::size_t c = 1; c < logits.cols(); ++c) {
            zmax = std::max(zmax, logits(s, c));
        }
        double sumexp = 0.0;
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            sumexp += std::exp(logits(s, c) - zmax);
        }
        for (std::size_t c = 0; c < logits.cols(); ++c) {
            delta(s, c) = std::exp(logits(s, c) - zmax) / sumexp / static_cast<double>(n);
        }
        delta(s, static_cast<std::size_t>(cache.labels[s])) -= 1.0 / static_cast<double>(n);
    }

    GradientSet grads;
    grads.layers.resize(num_layers);
    for (std::size_t li = num_layers; li-- > 0;) {
        const Layer& layer = model.layer(li);
        // delta currently holds d loss / d post_act[li]; fold in the activation
        const Matrix& z = cache.pre_act[li];
        const Matrix& h = cache.post_act[li];
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            for (std::size_t j = 0; j < delta.cols(); ++j) {
                delta(i, j) *= activate_grad(layer.activation, z(i, j), h(i, j));
            }
        }
        const Matrix& below = li == 0 ? cache.input : cache.post_act[li - 1];
        const Matrix g_eff = matmul_at_b(delta, below);  // out_dim x in_dim
        if (layer.kind == LayerKind::full_rank) {
            grads.layers[li].w = g_eff;
        } else {
            grads.layers[li].a = matmul_a_bt(g_eff, layer.b);  // g_eff * b^T
            grads.layers[li].b = matmul_at_b(layer.a, g_eff);  // a^T * g_eff
        }
        if (li > 0) {
            delta = matmul(delta, layer.effective_weight());
        }
    }
    return grads;
}

Matrix predict_logits(const Model& model, const Matrix& inputs) {
    if (inputs.cols() != model.spec().input_dim) {
        throw ShapeError("predict_logits: inputs are " + shape_str(inputs) +
                         ", model input_dim is " + std::to_string(model.spec().input_dim));
    }
    Matrix h = inputs;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const Layer& layer = model.layer(l);
        Matrix z = matmul_a_bt(h, layer.effective_weight());
        for (std::size_t i = 0; i < z.rows(); ++i) {
            for (std::size_t j = 0; j < z.cols(); ++j) {
                z(i, j) = activate(layer.activation, z(i, j));
            }
        }
        h = std::move(z);
    }
    return h;
}

double evaluate(const Model& model, const Matrix& inputs, std::span<const int> labels) {
    if (inputs.rows() == 0 || labels.empty()) {
        throw DataError("evaluate: empty dataset");
    }
    if (inputs.rows() != labels.size()) {
        throw DataError("evaluate: " + std::to_string(inputs.rows()) + " rows vs " +
                        std::to_string(labels.size()) + " labels");
    }
    const Matrix logits = predict_logits(model, inputs);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < logits.rows(); ++s) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c) {
            if (logits(s, c) > logits(s, best)) {
                best = c;
            }
        }
        if (static_cast<int>(best) == labels[s]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

}  // namespace gorp
