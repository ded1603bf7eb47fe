#pragma once

#include <filesystem>

#include <fimcb/image.hpp>

namespace fimcb {

/// Reads any PNG as 8-bit RGB (palette/gray expanded, 16-bit narrowed,
/// alpha stripped). Throws IoError on open failure, ConfigError on a
/// malformed file.
RGBImage read_png_rgb(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Throws IoError on failure.
void write_png_rgb(const std::filesystem::path& path, const RGBImage& img);

} // namespace fimcb
