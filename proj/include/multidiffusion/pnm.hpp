#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "multidiffusion/grid.hpp"

namespace mdiff {

enum class ImageMode { gray, rgb };

/// Binary PGM (P5) or PPM (P6) with maxval 255. Values are clamped to [0, 1]
/// and rounded to the nearest 8-bit level. Gray uses channel 0, rgb the
/// first three channels.
std::vector<std::uint8_t> encode_pnm(const LatentGrid& grid, ImageMode mode);
void write_image(const LatentGrid& grid, const std::filesystem::path& path, ImageMode mode);

/// Decodes P5/P6 into a grid with 1 or 3 channels scaled to [0, 1].
LatentGrid decode_pnm(const std::vector<std::uint8_t>& bytes);
LatentGrid read_image(const std::filesystem::path& path);

/// P5 mask: bytes must be 0 or 255.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const Mask& mask, const std::filesystem::path& path);

/// Writes via a sibling temporary file and rename, so a failed write leaves
/// no partial output behind.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace mdiff
