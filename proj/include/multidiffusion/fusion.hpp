#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "multidiffusion/denoiser.hpp"
#include "multidiffusion/grid.hpp"
#include "multidiffusion/mapping.hpp"
#include "multidiffusion/schedule.hpp"

namespace mdiff {

class CoverageError : public PlanError {
public:
    using PlanError::PlanError;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

enum class NoisePolicy {
    shared_canvas,  // one canvas-sized draw per step, restricted per view
    per_view,       // independent draw per (step, view)
};

/// Everything that defines one fused sampling run.
struct FusionPlan {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<PlanEntry> entries;
    PlanCondition condition;
    NoisePolicy noise_policy = NoisePolicy::shared_canvas;
    StepMode mode = StepMode::deterministic;
    std::uint64_t seed = 0;
    int batch_size = 8;

    /// Nonempty, every view fits, every prompt index resolves, and every
    /// canvas pixel has positive total weight.
    void validate() const;

    /// sum_j F_j^{-1}(W_j) over the canvas.
    WeightMap total_weight() const;

    Condition condition_of(std::size_t i) const { return lambda_map(entries.at(i), condition); }
};

struct StepReport {
    int t = 0;
    double ftd_loss_at_fused = 0.0;
    std::vector<double> residual_norms;  // per view, sqrt of its loss term
    double max_residual = 0.0;           // max |F_i(J) - target_i| where W_i > 0
};

/// sum_i || sqrt(W_i) (x) (F_i(J) - targets[i]) ||^2
///
/// Weights enter linearly so that `fuse` is the exact minimizer.
double ftd_loss(const FusionPlan& plan, const LatentGrid& canvas, std::span<const LatentGrid> targets);

/// Closed-form minimizer: per-pixel weighted average of the scattered
/// targets. Accumulation runs in ascending view index for every pixel, so the
/// result does not depend on the thread count.
LatentGrid fuse(const FusionPlan& plan, std::span<const LatentGrid> targets);

/// Gradient descent on the FTD loss from J = 0, for small test instances.
/// rate <= 0 picks 1 / (2 max total weight). Throws ConvergenceError if the
/// final gradient norm exceeds 1e-6.
LatentGrid oracle_minimize(const FusionPlan& plan, std::span<const LatentGrid> targets, int iterations,
                           double rate = 0.0);

/// J_T ~ N(0, I) for the plan's canvas and seed.
LatentGrid initial_noise(const FusionPlan& plan);

struct SampleResult {
    LatentGrid image;
    std::vector<StepReport> reports;
};

/// Full sampling loop: t = T..1, per-view Phi steps, fused by `fuse`.
SampleResult multidiffusion_sample(const FusionPlan& plan, const NoiseSchedule& schedule,
                                   const DenoiserRegistry& registry);

/// Plain reference-model rollout x_T -> x_0. `noise(t)` supplies z for
/// ancestral steps and is not called in deterministic mode.
LatentGrid phi_rollout(const NoisePredictor& predictor, const NoiseSchedule& schedule, LatentGrid x_T,
                       const Condition& condition, StepMode mode,
                       const std::function<LatentGrid(int)>& noise = {});

namespace reference {

/// Serial fuse built from scatter_accumulate, kept to cross-check the
/// parallel kernel.
LatentGrid fuse(const FusionPlan& plan, std::span<const LatentGrid> targets);

/// Serial sampling loop with the same stream layout as the parallel one.
SampleResult multidiffusion_sample(const FusionPlan& plan, const NoiseSchedule& schedule,
                                   const DenoiserRegistry& registry);

}  // namespace reference

}  // namespace mdiff
