#pragma once

#include <span>
#include <vector>

#include "multidiffusion/denoiser.hpp"
#include "multidiffusion/grid.hpp"

namespace mdiff {

/// A straight boundary between pixel columns (or rows) position-1 and position.
struct Boundary {
    enum class Axis { column, row };
    Axis axis = Axis::column;
    int position = 0;
};

struct SeamReport {
    std::vector<Boundary> boundaries;
    double mean = 0.0;  // pooled over every pixel pair of every boundary
    std::vector<double> per_boundary;
};

/// Mean absolute difference across each boundary, averaged over channels.
SeamReport seam_score(const LatentGrid& grid, std::span<const Boundary> boundaries);

/// Column boundaries at every multiple of `tile` strictly inside the width.
std::vector<Boundary> tile_boundaries(int width, int tile);

/// |A and B| / |A or B|; 1 when both masks are empty.
double iou(const Mask& pred, const Mask& truth);

/// Pixels whose max-channel distance to `color` is at most tol.
Mask foreground_threshold(const LatentGrid& grid, const Color& color, double tol);
Mask foreground_threshold(const LatentGrid& grid, const Denoiser& token, double tol);

struct GaussianStats {
    double mean = 0.0;
    double variance = 0.0;  // unbiased; 0 for a single entry
};

GaussianStats gaussian_stats(std::span<const float> values);
GaussianStats gaussian_stats(const LatentGrid& grid);

}  // namespace mdiff
