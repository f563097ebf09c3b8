#pragma once

#include <span>

#include "multidiffusion/fusion.hpp"

namespace mdiff::detail {

enum class Execution { serial, parallel };

void require_targets(const FusionPlan& plan, std::span<const LatentGrid> targets);
StepReport make_report(const FusionPlan& plan, int t, const LatentGrid& canvas, std::span<const LatentGrid> targets);

SampleResult sample(const FusionPlan& plan, const NoiseSchedule& schedule, const DenoiserRegistry& registry,
                    Execution execution);

}  // namespace mdiff::detail
