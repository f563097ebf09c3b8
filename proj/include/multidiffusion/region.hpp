#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "multidiffusion/fusion.hpp"

namespace mdiff {

struct Region {
    Mask mask;
    std::string token;
    bool scored = true;  // included in the ablation IoU
};

/// Region-based generation: canvas space equals reference space, one masked
/// view per region weighted by its mask.
struct RegionSpec {
    int height = 0;
    int width = 0;
    int channels = 3;
    std::vector<Region> regions;
    /// When set, a region with this token is appended covering the complement
    /// of all other masks.
    std::optional<std::string> background_token;
    bool bootstrap = false;
    /// Length of the bootstrapping phase in steps, counted from t = T.
    /// Views are bootstrapped while t > T - bootstrap_steps.
    int bootstrap_steps = 0;
    BackgroundSource background;
};

/// 20% of the steps, rounded.
int default_bootstrap_steps(int total_steps);

FusionPlan build_region_plan(const RegionSpec& spec, int total_steps);

struct AblationReport {
    std::vector<std::uint64_t> seeds;
    std::vector<double> iou_bootstrap;  // per seed, mean over scored regions
    std::vector<double> iou_plain;
    double mean_bootstrap = 0.0;
    double mean_plain = 0.0;
};

struct AblationOptions {
    double tolerance = 0.5;
    StepMode mode = StepMode::deterministic;
    NoisePolicy noise_policy = NoisePolicy::shared_canvas;
};

/// Generates every seed with and without bootstrapping and scores the
/// thresholded foreground of each scored region against its mask.
AblationReport run_region_ablation(const RegionSpec& spec, const NoiseSchedule& schedule,
                                   const DenoiserRegistry& registry, std::span<const std::uint64_t> seeds,
                                   const AblationOptions& options = {});

/// Mean IoU of the scored regions of `spec` in a generated image.
double region_iou(const RegionSpec& spec, const DenoiserRegistry& registry, const LatentGrid& image, double tol);

}  // namespace mdiff
