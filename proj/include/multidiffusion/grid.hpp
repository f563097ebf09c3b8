#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdiff {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

/// Dense H x W x C grid of 32-bit reals, row-major and channel-last.
///
/// This is the storage type for canvases, reference-space views, noise
/// draws and every denoiser input/output. Copies are deep.
class LatentGrid {
public:
    LatentGrid() = default;
    LatentGrid(int height, int width, int channels, float fill = 0.0f);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }
    float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

    float* pixel(int y, int x) noexcept { return data_.data() + index(y, x, 0); }
    const float* pixel(int y, int x) const noexcept { return data_.data() + index(y, x, 0); }

    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }

    bool same_shape(const LatentGrid& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    /// Copy of the h x w window whose top-left corner is (top, left).
    LatentGrid crop(int top, int left, int h, int w) const;

    /// Writes `window` into this grid at (top, left).
    void paste(const LatentGrid& window, int top, int left);

    bool all_finite() const noexcept;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

template <typename T>
class Plane {
public:
    Plane() = default;
    Plane(int height, int width, T fill);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    T operator()(int y, int x) const noexcept {
        return data_[static_cast<std::size_t>(y) * width_ + x];
    }
    std::span<const T> values() const noexcept { return data_; }

    friend bool operator==(const Plane&, const Plane&) = default;

protected:
    T& ref(int y, int x) noexcept { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

/// Binary region mask; values are exactly 0 or 1.
class Mask : public Plane<std::uint8_t> {
public:
    Mask() = default;
    Mask(int height, int width, bool fill = false);

    void set(int y, int x, bool on) noexcept { ref(y, x) = on ? 1 : 0; }
    bool contains(int y, int x) const noexcept { return (*this)(y, x) != 0; }
    std::size_t count() const noexcept;

    Mask complement() const;
};

/// Nonnegative per-pixel weights.
class WeightMap : public Plane<float> {
public:
    WeightMap() = default;
    WeightMap(int height, int width, float fill = 1.0f);

    static WeightMap from_mask(const Mask& mask);

    void set(int y, int x, float w);
};

void require_same_extent(int h1, int w1, int h2, int w2, const char* what);

/// out[p, c] = w[p] * grid[p, c]
LatentGrid hadamard(const WeightMap& weight, const LatentGrid& grid);
LatentGrid hadamard(const Mask& mask, const LatentGrid& grid);

LatentGrid operator+(const LatentGrid& a, const LatentGrid& b);
LatentGrid operator-(const LatentGrid& a, const LatentGrid& b);
LatentGrid operator*(float s, const LatentGrid& g);

double max_abs_diff(const LatentGrid& a, const LatentGrid& b);

}  // namespace mdiff
