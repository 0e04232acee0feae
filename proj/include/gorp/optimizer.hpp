#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "gorp/matrix.hpp"
#include "gorp/net.hpp"
#include "gorp/subspace.hpp"

namespace gorp {

struct GorpConfig {
    double lr_lora = 1.5e-4;
    double lr_full = 5e-5;
    double scale = 1.0;  // alpha applied when expanding the update
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t rank = 8;            // projector rank r for full-rank layers
    std::size_t refresh_period = 10; // steps between projector recomputations
    bool two_sided = false;          // compress with U_r^T G V_r instead of U_r^T G
    bool identity_projection = false;  // test hook: skip compression entirely
    bool bias_correction = false;      // off by default, matching the update rule
    SubspaceConfig subspace;
};

void validate(const GorpConfig& cfg);

/// Per-layer optimizer state. Moments live in the projected-gradient
/// coordinates: compressed (r x n) for full-rank layers once a projector
/// exists, ambient for LoRA factors.
struct GorpState {
    int layer_id = -1;
    long step = 1;
    long task_start_step = 1;
    long refresh_count = 0;
    bool compressed = false;
    Matrix m, v;               // full-rank moments
    Matrix proj_left;          // U_r, empty until the first refresh
    Matrix proj_right;         // V_r, two-sided mode only
    Matrix m_a, v_a, m_b, v_b; // LoRA factor moments
};

GorpState init_state(const Layer& layer, const GorpConfig& cfg);

/// Recomputes U_r (and V_r in two-sided mode) from the raw gradient at the
/// first step of a task and every refresh_period steps after; otherwise keeps
/// the previous projector.
void refresh_projector(GorpState& state, const Matrix& g, const GorpConfig& cfg);

/// One optimizer step for a full-rank layer: shared-space projection in the
/// ambient row space, scheduled projector refresh, rank-r compression, Adam
/// recurrences without bias correction, expansion, scaled descent update.
/// Returns ||S^T P|| / max(1, ||P||) for the ambient projected gradient P
/// (0 when the space is empty).
double step_full_rank(GorpState& state, Matrix& w, const Matrix& g,
                      const GradientSharedSpace& space, const GorpConfig& cfg);

/// One optimizer step for a LoRA layer: the A gradient is projected out of
/// the layer's shared space, B is left unprojected; both factors then take
/// the same Adam update. Returns the A-gradient residual ratio.
double step_lora(GorpState& state, Matrix& a, Matrix& b, const Matrix& g_a, const Matrix& g_b,
                 const GradientSharedSpace& space_a, const GorpConfig& cfg);

/// Task-boundary update: lifts the final first moment to the ambient space
/// (M_amb = U_r * M for compressed layers), folds it into the shared space
/// (build_first on the first task, extend afterwards), then resets the Adam
/// moments and projector for the next task.
void finalize_task(GorpState& state, const Layer& layer, GradientSharedSpace& space,
                   bool first_task, const GorpConfig& cfg);

// ---------------------------------------------------------------------------

/// Training-method interface used by the continual-learning harness.
class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(Model& model, const GradientSet& grads) = 0;
    virtual void end_task(Model& model) = 0;
    /// First moment of the layer's A factor, or nullptr when not tracked.
    virtual const Matrix* first_moment_a(std::size_t layer) const = 0;
    /// Worst shared-space residual ratio seen across all steps so far.
    virtual double max_ortho_residual() const { return 0.0; }
};

class GorpOptimizer final : public Optimizer {
public:
    GorpOptimizer(const Model& model, GorpConfig cfg);

    void step(Model& model, const GradientSet& grads) override;
    void end_task(Model& model) override;
    const Matrix* first_moment_a(std::size_t layer) const override;
    double max_ortho_residual() const override { return max_residual_; }

    const GorpState& state(std::size_t layer) const { return states_[layer]; }
    const GradientSharedSpace& space(std::size_t layer) const { return spaces_[layer]; }

private:
    GorpConfig cfg_;
    std::vector<GorpState> states_;
    std::vector<GradientSharedSpace> spaces_;
    std::size_t tasks_done_ = 0;
    double max_residual_ = 0.0;
};

enum class AdamScope { all_params, lora_only };

/// Unprotected Adam baseline (no subspace, no compression), same recurrences.
class PlainAdamOptimizer final : public Optimizer {
public:
    PlainAdamOptimizer(const Model& model, GorpConfig cfg, AdamScope scope);

    void step(Model& model, const GradientSet& grads) override;
    void end_task(Model& model) override;
    const Matrix* first_moment_a(std::size_t layer) const override;

private:
    struct Slot {
        Matrix m, v;       // full-rank
        Matrix m_a, v_a;   // LoRA
        Matrix m_b, v_b;
        long step = 1;
        long task_start_step = 1;
    };
    GorpConfig cfg_;
    AdamScope scope_;
    std::vector<Slot> slots_;
};

}  // namespace gorp
