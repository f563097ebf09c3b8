#include "multidiffusion/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "multidiffusion/parallel.hpp"

namespace mdiff {

namespace {

constexpr std::size_t kMaxEntries = std::size_t{1} << 32;

std::size_t checked_entries(int height, int width, int channels) {
    if (height <= 0 || width <= 0 || channels <= 0) {
        throw DimensionError("grid dimensions must be positive, got " + std::to_string(height) + "x" +
                             std::to_string(width) + "x" + std::to_string(channels));
    }
    std::size_t n = static_cast<std::size_t>(height);
    for (std::size_t factor : {static_cast<std::size_t>(width), static_cast<std::size_t>(channels)}) {
        if (n > kMaxEntries / factor) {
            throw DimensionError("grid dimensions overflow: " + std::to_string(height) + "x" +
                                 std::to_string(width) + "x" + std::to_string(channels));
        }
        n *= factor;
    }
    return n;
}

template <typename Op>
LatentGrid zip(const LatentGrid& a, const LatentGrid& b, const char* what, Op op) {
    if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": grid shapes differ");
    LatentGrid out(a.height(), a.width(), a.channels());
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    const auto n = static_cast<std::ptrdiff_t>(ov.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) ov[i] = op(av[i], bv[i]);
    return out;
}

}  // namespace

LatentGrid::LatentGrid(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    const std::size_t n = checked_entries(height, width, channels);
    if (!std::isfinite(fill)) throw ParameterError("grid fill value must be finite");
    data_.assign(n, fill);
}

LatentGrid LatentGrid::crop(int top, int left, int h, int w) const {
    if (top < 0 || left < 0 || h <= 0 || w <= 0 || top + h > height_ || left + w > width_) {
        throw DimensionError("crop window (" + std::to_string(top) + "," + std::to_string(left) + "," +
                             std::to_string(h) + "," + std::to_string(w) + ") outside " +
                             std::to_string(height_) + "x" + std::to_string(width_) + " grid");
    }
    LatentGrid out(h, w, channels_);
    const std::size_t row = static_cast<std::size_t>(w) * channels_;
    for (int y = 0; y < h; ++y) {
        std::copy_n(pixel(top + y, left), row, out.pixel(y, 0));
    }
    return out;
}

void LatentGrid::paste(const LatentGrid& window, int top, int left) {
    if (window.channels() != channels_ || top < 0 || left < 0 || top + window.height() > height_ ||
        left + window.width() > width_) {
        throw DimensionError("paste window does not fit the grid");
    }
    const std::size_t row = static_cast<std::size_t>(window.width()) * channels_;
    for (int y = 0; y < window.height(); ++y) {
        std::copy_n(window.pixel(y, 0), row, pixel(top + y, left));
    }
}

bool LatentGrid::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

template <typename T>
Plane<T>::Plane(int height, int width, T fill) : height_(height), width_(width) {
    data_.assign(checked_entries(height, width, 1), fill);
}

template class Plane<std::uint8_t>;
template class Plane<float>;

Mask::Mask(int height, int width, bool fill) : Plane<std::uint8_t>(height, width, fill ? 1 : 0) {}

std::size_t Mask::count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Mask Mask::complement() const {
    Mask out(height_, width_);
    for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] ? 0 : 1;
    return out;
}

WeightMap::WeightMap(int height, int width, float fill) : Plane<float>(height, width, fill) {
    if (!(fill >= 0.0f) || !std::isfinite(fill)) throw ParameterError("weights must be finite and >= 0");
}

WeightMap WeightMap::from_mask(const Mask& mask) {
    WeightMap out(mask.height(), mask.width(), 0.0f);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) out.ref(y, x) = mask.contains(y, x) ? 1.0f : 0.0f;
    return out;
}

void WeightMap::set(int y, int x, float w) {
    if (!(w >= 0.0f) || !std::isfinite(w)) throw ParameterError("weights must be finite and >= 0");
    ref(y, x) = w;
}

void require_same_extent(int h1, int w1, int h2, int w2, const char* what) {
    if (h1 != h2 || w1 != w2) {
        throw DimensionError(std::string(what) + ": extent " + std::to_string(h1) + "x" + std::to_string(w1) +
                             " does not match " + std::to_string(h2) + "x" + std::to_string(w2));
    }
}

namespace {

template <typename PlaneT>
LatentGrid weighted(const PlaneT& w, const LatentGrid& grid) {
    require_same_extent(w.height(), w.width(), grid.height(), grid.width(), "hadamard");
    LatentGrid out = grid;
    const int channels = grid.channels();
    parallel::for_each_index(grid.height(), [&](std::ptrdiff_t y) {
        for (int x = 0; x < grid.width(); ++x) {
            const float s = static_cast<float>(w(static_cast<int>(y), x));
            float* p = out.pixel(static_cast<int>(y), x);
            for (int c = 0; c < channels; ++c) p[c] *= s;
        }
    });
    return out;
}

}  // namespace

LatentGrid hadamard(const WeightMap& weight, const LatentGrid& grid) { return weighted(weight, grid); }

LatentGrid hadamard(const Mask& mask, const LatentGrid& grid) { return weighted(mask, grid); }

LatentGrid operator+(const LatentGrid& a, const LatentGrid& b) {
    return zip(a, b, "add", [](float x, float y) { return x + y; });
}

LatentGrid operator-(const LatentGrid& a, const LatentGrid& b) {
    return zip(a, b, "subtract", [](float x, float y) { return x - y; });
}

LatentGrid operator*(float s, const LatentGrid& g) {
    LatentGrid out = g;
    for (float& v : out.values()) v *= s;
    return out;
}

double max_abs_diff(const LatentGrid& a, const LatentGrid& b) {
    if (!a.same_shape(b)) throw DimensionError("max_abs_diff: grid shapes differ");
    double worst = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(av[i]) - static_cast<double>(bv[i])));
    return worst;
}

}  // namespace mdiff
