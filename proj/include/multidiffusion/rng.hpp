#pragma once

#include <cstdint>
#include <random>

#include "multidiffusion/grid.hpp"

namespace mdiff {

/// Named sub-streams of one run. Each label (and index) gets its own
/// generator so adding views or steps never shifts unrelated draws.
enum class Stream : std::uint64_t {
    init_noise = 1,
    step_noise = 2,
    view_noise = 3,
    background_color = 4,
    background_noise = 5,
};

class SeedTree {
public:
    explicit SeedTree(std::uint64_t root) : root_(root) {}

    std::uint64_t root() const noexcept { return root_; }
    std::uint64_t derive(Stream label, std::uint64_t a = 0, std::uint64_t b = 0) const noexcept;
    std::mt19937_64 generator(Stream label, std::uint64_t a = 0, std::uint64_t b = 0) const {
        return std::mt19937_64(derive(label, a, b));
    }

private:
    std::uint64_t root_;
};

/// i.i.d. N(0, 1) entries drawn in row-major, channel-last order.
LatentGrid standard_normal(int height, int width, int channels, std::mt19937_64& gen);

}  // namespace mdiff
