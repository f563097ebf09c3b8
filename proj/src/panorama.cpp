#include "multidiffusion/panorama.hpp"

#include <string>

namespace mdiff {

std::vector<int> window_offsets(int extent, int window, int stride) {
    if (stride < 1) throw ParameterError("stride must be >= 1");
    if (window < 1 || window > extent) {
        throw DimensionError("window " + std::to_string(window) + " does not fit extent " + std::to_string(extent));
    }
    std::vector<int> offsets;
    const int last = extent - window;
    for (int o = 0; o <= last; o += stride) offsets.push_back(o);
    if (offsets.back() != last) offsets.push_back(last);
    return offsets;
}

FusionPlan build_panorama_plan(const PanoramaSpec& spec) {
    if (spec.prompt.empty()) throw ParameterError("panorama needs a prompt token");
    FusionPlan plan;
    plan.height = spec.height;
    plan.width = spec.width;
    plan.channels = spec.channels;
    plan.condition.prompts = {Condition{spec.prompt}};
    for (int top : window_offsets(spec.height, spec.window_height, spec.stride)) {
        for (int left : window_offsets(spec.width, spec.window_width, spec.stride)) {
            plan.entries.push_back(PlanEntry{ViewMap::crop(top, left, spec.window_height, spec.window_width), 0});
        }
    }
    plan.validate();
    return plan;
}

}  // namespace mdiff
