#include "gorp/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "gorp/error.hpp"
#include "gorp/linalg.hpp"

namespace gorp {

void validate(const GorpConfig& cfg) {
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
        throw ConfigError("optimizer betas must lie in [0, 1)");
    }
    if (!(cfg.lr_lora > 0.0) || !(cfg.lr_full > 0.0)) {
        throw ConfigError("learning rates must be > 0");
    }
    if (!(cfg.adam_eps > 0.0)) {
        throw ConfigError("adam_eps must be > 0");
    }
    if (cfg.rank < 1) {
        throw ConfigError("projector rank must be >= 1");
    }
    if (cfg.refresh_period < 1) {
        throw ConfigError("refresh_period must be >= 1");
    }
    validate(cfg.subspace);
}

namespace {

Matrix zeros_like(const Matrix& g) { return Matrix(g.rows(), g.cols()); }

void ensure_moment_shape(Matrix& m, Matrix& v, const Matrix& p) {
    if (!m.same_shape(p)) {
        m = zeros_like(p);
        v = zeros_like(p);
    }
}

double residual_ratio(const GradientSharedSpace& space, const Matrix& projected) {
    if (space.empty()) {
        return 0.0;
    }
    const double num = std::sqrt(frobenius_norm_sq(matmul_at_b(space.basis, projected)));
    const double den = std::max(1.0, std::sqrt(frobenius_norm_sq(projected)));
    return num / den;
}

Matrix adam_step(GorpState& state, Matrix& m, Matrix& v, const Matrix& p, const GorpConfig& cfg) {
    ensure_moment_shape(m, v, p);
    adam_update_moments(m, v, p, cfg.beta1, cfg.beta2);
    if (cfg.bias_correction) {
        const long t_local = state.step - state.task_start_step + 1;
        return adam_direction_corrected(m, v, cfg.adam_eps, cfg.beta1, cfg.beta2, t_local);
    }
    return adam_direction(m, v, cfg.adam_eps);
}

}  // namespace

GorpState init_state(const Layer& layer, const GorpConfig& cfg) {
    (void)cfg;
    GorpState state;
    state.layer_id = layer.id;
    if (layer.kind == LayerKind::full_rank) {
        state.m = zeros_like(layer.w);
        state.v = zeros_like(layer.w);
    } else {
        state.m_a = zeros_like(layer.a);
        state.v_a = zeros_like(layer.a);
        state.m_b = zeros_like(layer.b);
        state.v_b = zeros_like(layer.b);
    }
    return state;
}

void refresh_projector(GorpState& state, const Matrix& g, const GorpConfig& cfg) {
    if (cfg.identity_projection) {
        return;
    }
    const bool due = (state.step - state.task_start_step) % static_cast<long>(cfg.refresh_period) == 0;
    if (!due && !state.proj_left.empty()) {
        return;  // reuse the previous projector between refreshes
    }
    const SvdResult svd = thin_svd(g);
    const std::size_t r = std::min<std::size_t>(cfg.rank, svd.singular_values.size());
    Matrix u(g.rows(), r);
    for (std::size_t i = 0; i < u.rows(); ++i) {
        for (std::size_t j = 0; j < r; ++j) {
            u(i, j) = svd.u(i, j);
        }
    }
    state.proj_left = std::move(u);
    if (cfg.two_sided) {
        Matrix vr(g.cols(), r);
        for (std::size_t i = 0; i < vr.rows(); ++i) {
            for (std::size_t j = 0; j < r; ++j) {
                vr(i, j) = svd.vt(j, i);
            }
        }
        state.proj_right = std::move(vr);
    }
    state.compressed = true;
    ++state.refresh_count;
}

double step_full_rank(GorpState& state, Matrix& w, const Matrix& g,
                      const GradientSharedSpace& space, const GorpConfig& cfg) {
    if (!w.same_shape(g)) {
        throw ShapeError("step_full_rank: weight is " + shape_str(w) + ", gradient is " +
                         shape_str(g));
    }
    const Matrix g_amb = project_out(space, g);
    const double residual = residual_ratio(space, g_amb);

    refresh_projector(state, g, cfg);
    if (!cfg.identity_projection && state.proj_left.empty()) {
        throw UsageError("step_full_rank: projector absent after refresh");
    }

    Matrix p;
    if (cfg.identity_projection) {
        p = g_amb;
    } else if (cfg.two_sided) {
        p = matmul(matmul_at_b(state.proj_left, g_amb), state.proj_right);
    } else {
        p = matmul_at_b(state.proj_left, g_amb);
    }

    const Matrix direction = adam_step(state, state.m, state.v, p, cfg);

    Matrix update;
    if (cfg.identity_projection) {
        update = direction;
    } else if (cfg.two_sided) {
        update = matmul(state.proj_left, matmul_a_bt(direction, state.proj_right));
    } else {
        update = matmul(state.proj_left, direction);
    }
    axpy(-cfg.lr_full * cfg.scale, update, w);
    ++state.step;
    return residual;
}

double step_lora(GorpState& state, Matrix& a, Matrix& b, const Matrix& g_a, const Matrix& g_b,
                 const GradientSharedSpace& space_a, const GorpConfig& cfg) {
    if (!a.same_shape(g_a) || !b.same_shape(g_b)) {
        throw ShapeError("step_lora: factors are " + shape_str(a) + "/" + shape_str(b) +
                         ", gradients are " + shape_str(g_a) + "/" + shape_str(g_b));
    }
    const Matrix g_a_proj = project_out(space_a, g_a);
    const double residual = residual_ratio(space_a, g_a_proj);

    const Matrix dir_a = adam_step(state, state.m_a, state.v_a, g_a_proj, cfg);
    axpy(-cfg.lr_lora * cfg.scale, dir_a, a);
    const Matrix dir_b = adam_step(state, state.m_b, state.v_b, g_b, cfg);
    axpy(-cfg.lr_lora * cfg.scale, dir_b, b);
    ++state.step;
    return residual;
}

void finalize_task(GorpState& state, const Layer& layer, GradientSharedSpace& space,
                   bool first_task, const GorpConfig& cfg) {
    Matrix moment_ambient;
    if (layer.kind == LayerKind::full_rank) {
        if (state.compressed && !state.proj_left.empty() &&
            state.m.rows() == state.proj_left.cols()) {
            moment_ambient = matmul(state.proj_left, state.m);
            if (cfg.two_sided && !state.proj_right.empty()) {
                moment_ambient = matmul_a_bt(moment_ambient, state.proj_right);
            }
        } else {
            moment_ambient = state.m;
        }
    } else {
        moment_ambient = state.m_a;
    }

    if (frobenius_norm_sq(moment_ambient) > 0.0) {
        if (first_task && space.empty()) {
            const int id = space.layer_id;
            space = build_first(moment_ambient, cfg.subspace);
            space.layer_id = id;
        } else {
            space = extend(std::move(space), moment_ambient, cfg.subspace);
        }
        space = truncate_to_capacity(std::move(space));
    }

    // fresh Adam state and projector for the next task
    const long next_step = state.step;
    GorpState reset = init_state(layer, cfg);
    reset.step = next_step;
    reset.task_start_step = next_step;
    reset.refresh_count = state.refresh_count;
    state = std::move(reset);
}

// --------------------------------- GorpOptimizer ---------------------------

GorpOptimizer::GorpOptimizer(const Model& model, GorpConfig cfg) : cfg_(std::move(cfg)) {
    validate(cfg_);
    states_.reserve(model.num_layers());
    spaces_.reserve(model.num_layers());
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        const Layer& layer = model.layer(i);
        states_.push_back(init_state(layer, cfg_));
        GradientSharedSpace space;
        space.layer_id = layer.id;
        space.capacity = cfg_.subspace.capacity;
        space.basis =
            Matrix(layer.kind == LayerKind::full_rank ? layer.w.rows() : layer.a.rows(), 0);
        spaces_.push_back(std::move(space));
    }
}

void GorpOptimizer::step(Model& model, const GradientSet& grads) {
    if (grads.layers.size() != states_.size()) {
        throw UsageError("GorpOptimizer::step: gradient set covers " +
                         std::to_string(grads.layers.size()) + " layers, model has " +
                         std::to_string(states_.size()));
    }
    for (std::size_t i = 0; i < states_.size(); ++i) {
        Layer& layer = model.mutable_layer(i);
        double residual = 0.0;
        if (layer.kind == LayerKind::full_rank) {
            residual = step_full_rank(states_[i], layer.w, grads.layers[i].w, spaces_[i], cfg_);
        } else {
            residual = step_lora(states_[i], layer.a, layer.b, grads.layers[i].a,
                                 grads.layers[i].b, spaces_[i], cfg_);
        }
        max_residual_ = std::max(max_residual_, residual);
    }
}

void GorpOptimizer::end_task(Model& model) {
    for (std::size_t i = 0; i < states_.size(); ++i) {
        finalize_task(states_[i], model.layer(i), spaces_[i], tasks_done_ == 0, cfg_);
    }
    ++tasks_done_;
}

const Matrix* GorpOptimizer::first_moment_a(std::size_t layer) const {
    if (layer >= states_.size() || states_[layer].m_a.empty()) {
        return nullptr;
    }
    return &states_[layer].m_a;
}

// ------------------------------- PlainAdamOptimizer ------------------------

PlainAdamOptimizer::PlainAdamOptimizer(const Model& model, GorpConfig cfg, AdamScope scope)
    : cfg_(std::move(cfg)), scope_(scope) {
    validate(cfg_);
    slots_.resize(model.num_layers());
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        const Layer& layer = model.layer(i);
        Slot& slot = slots_[i];
        if (layer.kind == LayerKind::full_rank) {
            slot.m = zeros_like(layer.w);
            slot.v = zeros_like(layer.w);
        } else {
            slot.m_a = zeros_like(layer.a);
            slot.v_a = zeros_like(layer.a);
            slot.m_b = zeros_like(layer.b);
            slot.v_b = zeros_like(layer.b);
        }
    }
}

void PlainAdamOptimizer::step(Model& model, const GradientSet& grads) {
    if (grads.layers.size() != slots_.size()) {
        throw UsageError("PlainAdamOptimizer::step: gradient/layer count mismatch");
    }
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        Layer& layer = model.mutable_layer(i);
        Slot& slot = slots_[i];
        const long t_local = slot.step - slot.task_start_step + 1;
        if (layer.kind == LayerKind::full_rank) {
            if (scope_ == AdamScope::all_params) {
                adam_update_moments(slot.m, slot.v, grads.layers[i].w, cfg_.beta1, cfg_.beta2);
                const Matrix dir =
                    cfg_.bias_correction
                        ? adam_direction_corrected(slot.m, slot.v, cfg_.adam_eps, cfg_.beta1,
                                                   cfg_.beta2, t_local)
                        : adam_direction(slot.m, slot.v, cfg_.adam_eps);
                axpy(-cfg_.lr_full, dir, layer.w);
            }
        } else {
            adam_update_moments(slot.m_a, slot.v_a, grads.layers[i].a, cfg_.beta1, cfg_.beta2);
            adam_update_moments(slot.m_b, slot.v_b, grads.layers[i].b, cfg_.beta1, cfg_.beta2);
            const Matrix dir_a =
                cfg_.bias_correction
                    ? adam_direction_corrected(slot.m_a, slot.v_a, cfg_.adam_eps, cfg_.beta1,
                                               cfg_.beta2, t_local)
                    : adam_direction(slot.m_a, slot.v_a, cfg_.adam_eps);
            const Matrix dir_b =
                cfg_.bias_correction
                    ? adam_direction_corrected(slot.m_b, slot.v_b, cfg_.adam_eps, cfg_.beta1,
                                               cfg_.beta2, t_local)
                    : adam_direction(slot.m_b, slot.v_b, cfg_.adam_eps);
            axpy(-cfg_.lr_lora, dir_a, layer.a);
            axpy(-cfg_.lr_lora, dir_b, layer.b);
        }
        ++slot.step;
    }
}

void PlainAdamOptimizer::end_task(Model& model) {
    (void)model;
    for (Slot& slot : slots_) {
        auto reset = [](Matrix& m) {
            if (!m.empty()) {
                m = Matrix(m.rows(), m.cols());
            }
        };
        reset(slot.m);
        reset(slot.v);
        reset(slot.m_a);
        reset(slot.v_a);
        reset(slot.m_b);
        reset(slot.v_b);
        slot.task_start_step = slot.step;
    }
}

const Matrix* PlainAdamOptimizer::first_moment_a(std::size_t layer) const {
    if (layer >= slots_.size() || slots_[layer].m_a.empty()) {
        return nullptr;
    }
    return &slots_[layer].m_a;
}

}  // namespace gorp
