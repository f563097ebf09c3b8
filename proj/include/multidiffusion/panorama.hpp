#pragma once

#include <string>
#include <vector>

#include "multidiffusion/fusion.hpp"

namespace mdiff {

/// Sliding-window panorama geometry on a latent canvas.
struct PanoramaSpec {
    int height = 64;
    int width = 64;
    int channels = 4;
    int window_height = 64;
    int window_width = 64;
    int stride = 8;
    std::string prompt;
};

/// Window offsets 0, stride, 2 stride, ... plus a final window aligned to the
/// far edge when (extent - window) is not a multiple of the stride.
std::vector<int> window_offsets(int extent, int window, int stride);

/// One all-ones crop per window position, all conditioned on the shared
/// prompt. Mode, seed and noise policy keep their FusionPlan defaults.
FusionPlan build_panorama_plan(const PanoramaSpec& spec);

}  // namespace mdiff
