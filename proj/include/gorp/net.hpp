#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gorp/matrix.hpp"

namespace gorp {

enum class Activation { relu, tanh, none };
enum class LayerKind { full_rank, frozen_lora };

std::string to_string(Activation a);
std::string to_string(LayerKind k);
Activation activation_from_string(const std::string& s);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
    LayerKind kind = LayerKind::full_rank;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::size_t lora_rank = 0;  // frozen_lora only
    Activation activation = Activation::none;
};

struct ModelSpec {
    std::size_t input_dim = 0;
    std::size_t num_classes = 0;
    std::vector<LayerSpec> layers;
};

void validate(const ModelSpec& spec);

/// One trainable weight site. Weights are out_dim x in_dim; a layer maps a
/// batch X (n x in) to X * W_eff^T. For frozen_lora the effective weight is
/// w0 + a*b with w0 fixed after initialization.
struct Layer {
    LayerKind kind = LayerKind::full_rank;
    Activation activation = Activation::none;
    int id = 0;
    Matrix w;           // full_rank
    Matrix w0, a, b;    // frozen_lora: w0 (m x n), a (m x r), b (r x n)

    Matrix effective_weight() const;
    std::size_t out_dim() const { return kind == LayerKind::full_rank ? w.rows() : w0.rows(); }
    std::size_t in_dim() const { return kind == LayerKind::full_rank ? w.cols() : w0.cols(); }
};

class Model {
public:
    Model() = default;
    Model(ModelSpec spec, std::vector<Layer> layers)
        : spec_(std::move(spec)), layers_(std::move(layers)) {}

    const ModelSpec& spec() const { return spec_; }
    std::size_t num_layers() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return layers_[i]; }

    /// Mutable access invalidates outstanding forward caches.
    Layer& mutable_layer(std::size_t i) {
        ++version_;
        return layers_[i];
    }

    std::uint64_t version() const { return version_; }

private:
    ModelSpec spec_;
    std::vector<Layer> layers_;
    std::uint64_t version_ = 0;
};

struct Batch {
    Matrix inputs;            // n x input_dim
    std::vector<int> labels;  // length n, values in [0, num_classes)
};

struct ForwardCache {
    std::uint64_t model_version = 0;
    Matrix input;
    std::vector<Matrix> pre_act;   // per layer, n x out_dim
    std::vector<Matrix> post_act;  // per layer, n x out_dim
    std::vector<int> labels;
    double loss = 0.0;
};

struct LayerGrads {
    Matrix w;     // full_rank
    Matrix a, b;  // frozen_lora
};

struct GradientSet {
    std::vector<LayerGrads> layers;
};

/// Deterministic initialization: full-rank and frozen weights are
/// Gaussian(0, 1/m) with m the row count; LoRA a is Gaussian(0, 1/m), b zero.
Model init_model(const ModelSpec& spec, std::uint64_t seed);

/// Mean softmax cross-entropy over the batch plus the activations needed for
/// the backward pass.
std::pair<double, ForwardCache> forward(const Model& model, const Batch& batch);

/// Analytic gradients of the cached loss with respect to every trainable
/// matrix; for frozen_lora, g_a = g_eff * b^T and g_b = a^T * g_eff.
GradientSet backward(const Model& model, const ForwardCache& cache, const Batch& batch);

Matrix predict_logits(const Model& model, const Matrix& inputs);

/// Fraction of argmax-correct predictions; ties resolve to the lowest class.
double evaluate(const Model& model, const Matrix& inputs, std::span<const int> labels);

}  // namespace gorp
