#include <algorithm>
#include <optional>

#include "multidiffusion/parallel.hpp"
#include "sampler_detail.hpp"

namespace mdiff::detail {

SampleResult sample(const FusionPlan& plan, const NoiseSchedule& schedule, const DenoiserRegistry& registry,
                    Execution execution) {
    plan.validate();
    const std::size_t n = plan.entries.size();
    std::vector<Condition> conditions(n);
    for (std::size_t i = 0; i < n; ++i) {
        conditions[i] = plan.condition_of(i);
        (void)registry.resolve(conditions[i].token);
    }

    const RegistryPredictor predictor(registry, schedule);
    const SeedTree seeds(plan.seed);
    const bool any_bootstrap = std::any_of(plan.entries.begin(), plan.entries.end(), [](const PlanEntry& e) {
        return std::holds_alternative<BootstrapView>(e.view.kind());
    });
    std::optional<BackgroundProcess> background;
    if (any_bootstrap) background.emplace(schedule, seeds, plan.height, plan.width, plan.channels);

    SampleResult result;
    LatentGrid canvas = initial_noise(plan);
    for (int t = schedule.steps(); t >= 1; --t) {
        const bool inject = plan.mode == StepMode::ancestral && t > 1;
        LatentGrid shared_noise;
        if (inject && plan.noise_policy == NoisePolicy::shared_canvas) {
            auto gen = seeds.generator(Stream::step_noise, static_cast<std::uint64_t>(t));
            shared_noise = standard_normal(plan.height, plan.width, plan.channels, gen);
        }

        std::vector<LatentGrid> targets(n);
        auto step_view = [&](std::size_t i) {
            const ViewMap& view = plan.entries[i].view;
            const LatentGrid input = extract(view, canvas, t, background ? &*background : nullptr);
            LatentGrid z;
            if (inject) {
                if (plan.noise_policy == NoisePolicy::shared_canvas) {
                    z = restrict_to_view(view, shared_noise);
                } else {
                    auto gen = seeds.generator(Stream::view_noise, static_cast<std::uint64_t>(t), i);
                    z = standard_normal(view.height(), view.width(), plan.channels, gen);
                }
            }
            targets[i] = phi_step(predictor, schedule, input, t, conditions[i], plan.mode, z);
        };

        const std::size_t batch = static_cast<std::size_t>(plan.batch_size);
        for (std::size_t begin = 0; begin < n; begin += batch) {
            const std::size_t count = std::min(batch, n - begin);
            if (execution == Execution::parallel) {
                parallel::for_each_index(static_cast<std::ptrdiff_t>(count),
                                         [&](std::ptrdiff_t k) { step_view(begin + static_cast<std::size_t>(k)); });
            } else {
                for (std::size_t k = 0; k < count; ++k) step_view(begin + k);
            }
        }

        LatentGrid next = execution == Execution::parallel ? fuse(plan, targets) : reference::fuse(plan, targets);
        result.reports.push_back(make_report(plan, t, next, targets));
        canvas = std::move(next);
    }
    result.image = std::move(canvas);
    return result;
}

}  // namespace mdiff::detail
