#include <string>

#include "sampler_detail.hpp"

namespace mdiff::reference {

LatentGrid fuse(const FusionPlan& plan, std::span<const LatentGrid> targets) {
    detail::require_targets(plan, targets);
    LatentGrid num(plan.height, plan.width, plan.channels, 0.0f);
    LatentGrid den(plan.height, plan.width, 1, 0.0f);
    for (std::size_t i = 0; i < plan.entries.size(); ++i) {
        scatter_accumulate(plan.entries[i].view, targets[i], num, den);
    }
    LatentGrid out(plan.height, plan.width, plan.channels);
    for (int y = 0; y < plan.height; ++y) {
        for (int x = 0; x < plan.width; ++x) {
            const float d = den.at(y, x, 0);
            if (!(d > 0.0f)) {
                throw CoverageError("zero total weight at pixel (" + std::to_string(y) + ", " + std::to_string(x) +
                                    ")");
            }
            for (int c = 0; c < plan.channels; ++c) out.at(y, x, c) = num.at(y, x, c) / d;
        }
    }
    return out;
}

SampleResult multidiffusion_sample(const FusionPlan& plan, const NoiseSchedule& schedule,
                                   const DenoiserRegistry& registry) {
    return detail::sample(plan, schedule, registry, detail::Execution::serial);
}

}  // namespace mdiff::reference
