#include "multidiffusion/rng.hpp"

namespace mdiff {

namespace {

// SplitMix64 finalizer.
std::uint64_t mix(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t SeedTree::derive(Stream label, std::uint64_t a, std::uint64_t b) const noexcept {
    std::uint64_t h = mix(root_);
    h = mix(h ^ static_cast<std::uint64_t>(label));
    h = mix(h ^ a);
    return mix(h ^ b);
}

LatentGrid standard_normal(int height, int width, int channels, std::mt19937_64& gen) {
    LatentGrid out(height, width, channels);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    for (float& v : out.values()) v = normal(gen);
    return out;
}

}  // namespace mdiff
