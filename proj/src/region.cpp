#include "multidiffusion/region.hpp"

#include <cmath>
#include <string>

#include "multidiffusion/metrics.hpp"

namespace mdiff {

int default_bootstrap_steps(int total_steps) { return static_cast<int>(std::lround(0.2 * total_steps)); }

FusionPlan build_region_plan(const RegionSpec& spec, int total_steps) {
    if (spec.regions.empty()) throw PlanError("region plan has no regions");
    if (spec.bootstrap && (spec.bootstrap_steps < 0 || spec.bootstrap_steps > total_steps)) {
        throw RangeError("t_init " + std::to_string(spec.bootstrap_steps) + " outside 0.." +
                         std::to_string(total_steps));
    }

    std::vector<Region> regions = spec.regions;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const Mask& m = regions[i].mask;
        if (m.height() != spec.height || m.width() != spec.width) {
            throw DimensionError("mask of region " + std::to_string(i) + " is " + std::to_string(m.height()) + "x" +
                                 std::to_string(m.width()) + ", canvas is " + std::to_string(spec.height) + "x" +
                                 std::to_string(spec.width));
        }
    }
    if (spec.background_token) {
        Mask covered(spec.height, spec.width);
        for (const Region& r : regions)
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x)
                    if (r.mask.contains(y, x)) covered.set(y, x, true);
        regions.push_back(Region{covered.complement(), *spec.background_token, false});
    }

    FusionPlan plan;
    plan.height = spec.height;
    plan.width = spec.width;
    plan.channels = spec.channels;
    const int stop = total_steps - spec.bootstrap_steps;
    for (std::size_t i = 0; i < regions.size(); ++i) {
        plan.condition.prompts.push_back(Condition{regions[i].token});
        ViewMap view = spec.bootstrap ? ViewMap::bootstrapped(regions[i].mask, stop, spec.background)
                                      : ViewMap::masked_identity(regions[i].mask);
        plan.entries.push_back(PlanEntry{std::move(view), i});
    }

    try {
        plan.validate();
    } catch (const CoverageError& e) {
        throw CoverageError(std::string(e.what()) + "; add a background region covering the remaining pixels");
    }
    return plan;
}

double region_iou(const RegionSpec& spec, const DenoiserRegistry& registry, const LatentGrid& image, double tol) {
    double sum = 0.0;
    int count = 0;
    for (const Region& r : spec.regions) {
        if (!r.scored) continue;
        const Mask pred = foreground_threshold(image, registry.resolve(r.token), tol);
        sum += iou(pred, r.mask);
        ++count;
    }
    if (count == 0) throw PlanError("no scored regions to evaluate");
    return sum / count;
}

AblationReport run_region_ablation(const RegionSpec& spec, const NoiseSchedule& schedule,
                                   const DenoiserRegistry& registry, std::span<const std::uint64_t> seeds,
                                   const AblationOptions& options) {
    RegionSpec with = spec;
    with.bootstrap = true;
    RegionSpec without = spec;
    without.bootstrap = false;

    AblationReport report;
    for (std::uint64_t seed : seeds) {
        for (bool boot : {true, false}) {
            FusionPlan plan = build_region_plan(boot ? with : without, schedule.steps());
            plan.seed = seed;
            plan.mode = options.mode;
            plan.noise_policy = options.noise_policy;
            const SampleResult result = multidiffusion_sample(plan, schedule, registry);
            const double score = region_iou(spec, registry, result.image, options.tolerance);
            (boot ? report.iou_bootstrap : report.iou_plain).push_back(score);
        }
        report.seeds.push_back(seed);
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    report.mean_bootstrap = mean(report.iou_bootstrap);
    report.mean_plain = mean(report.iou_plain);
    return report;
}

}  // namespace mdiff
