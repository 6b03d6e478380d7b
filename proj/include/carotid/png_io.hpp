#pragma once

#include <cstdint>
#include <filesystem>

#include "carotid/grid.hpp"

namespace carotid::png {

/// Reads any PNG as 8-bit grayscale.
Grid<std::uint8_t> read_gray8(const std::filesystem::path& path);

void write_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels);

/// Writes a binary mask with foreground stored as 255.
void write_mask(const std::filesystem::path& path, const Mask& mask);

/// Reads a 0/255 mask; any value >= 128 is foreground.
Mask read_mask(const std::filesystem::path& path);

}  // namespace carotid::png
