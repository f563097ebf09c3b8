#include "multidiffusion/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mdiff {

SeamReport seam_score(const LatentGrid& grid, std::span<const Boundary> boundaries) {
    SeamReport report;
    report.boundaries.assign(boundaries.begin(), boundaries.end());
    double total = 0.0;
    std::size_t pairs = 0;
    for (const Boundary& b : boundaries) {
        const bool column = b.axis == Boundary::Axis::column;
        const int limit = column ? grid.width() : grid.height();
        if (b.position < 1 || b.position >= limit) {
            throw RangeError("seam boundary at " + std::to_string(b.position) + " is not inside the grid");
        }
        const int along = column ? grid.height() : grid.width();
        double sum = 0.0;
        for (int i = 0; i < along; ++i) {
            const float* p = column ? grid.pixel(i, b.position - 1) : grid.pixel(b.position - 1, i);
            const float* q = column ? grid.pixel(i, b.position) : grid.pixel(b.position, i);
            double diff = 0.0;
            for (int c = 0; c < grid.channels(); ++c) diff += std::abs(static_cast<double>(p[c]) - q[c]);
            sum += diff / grid.channels();
        }
        report.per_boundary.push_back(sum / along);
        total += sum;
        pairs += static_cast<std::size_t>(along);
    }
    report.mean = pairs ? total / static_cast<double>(pairs) : 0.0;
    return report;
}

std::vector<Boundary> tile_boundaries(int width, int tile) {
    if (tile < 1) throw ParameterError("tile width must be >= 1");
    std::vector<Boundary> out;
    for (int x = tile; x < width; x += tile) out.push_back(Boundary{Boundary::Axis::column, x});
    return out;
}

double iou(const Mask& pred, const Mask& truth) {
    require_same_extent(pred.height(), pred.width(), truth.height(), truth.width(), "iou");
    std::size_t inter = 0;
    std::size_t uni = 0;
    auto p = pred.values();
    auto g = truth.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += (p[i] && g[i]) ? 1 : 0;
        uni += (p[i] || g[i]) ? 1 : 0;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Mask foreground_threshold(const LatentGrid& grid, const Color& color, double tol) {
    if (color.size() != 1 && static_cast<int>(color.size()) != grid.channels()) {
        throw DimensionError("threshold color has " + std::to_string(color.size()) + " components");
    }
    Mask out(grid.height(), grid.width());
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            double worst = 0.0;
            for (int c = 0; c < grid.channels(); ++c) {
                const double ref = color.size() == 1 ? color[0] : color[c];
                worst = std::max(worst, std::abs(grid.at(y, x, c) - ref));
            }
            out.set(y, x, worst <= tol);
        }
    }
    return out;
}

Mask foreground_threshold(const LatentGrid& grid, const Denoiser& token, double tol) {
    const auto color = token.foreground_color();
    if (!color) throw ParameterError("token has no constant-color or disk pattern to threshold against");
    return foreground_threshold(grid, *color, tol);
}

GaussianStats gaussian_stats(std::span<const float> values) {
    if (values.empty()) throw DimensionError("gaussian_stats needs at least one value");
    double mean = 0.0;
    for (float v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (float v : values) ss += (v - mean) * (v - mean);
    const double var = values.size() > 1 ? ss / static_cast<double>(values.size() - 1) : 0.0;
    return {mean, var};
}

GaussianStats gaussian_stats(const LatentGrid& grid) { return gaussian_stats(grid.values()); }

}  // namespace mdiff
