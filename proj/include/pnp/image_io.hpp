#pragma once

#include <filesystem>

#include "pnp/image.hpp"

namespace pnp {

enum class ImageFormat { Pgm, Ppm, Pfm };

/// Reads binary PGM (P5), PPM (P6) with maxval 255 or 65535, or PFM (Pf/PF).
/// The format is detected from the magic number, not the extension.
Image read_image(const std::filesystem::path& path);

/// Writes by extension: .pgm/.ppm quantize to `bit_depth` (8 or 16) after clamping to [0,1];
/// .pfm stores float32 little-endian. PNM requires 1 or 3 channels respectively.
void write_image(const std::filesystem::path& path, const Image& img, int bit_depth = 8);
void write_image(const std::filesystem::path& path, const Image& img, ImageFormat format, int bit_depth = 8);

ImageFormat format_from_extension(const std::filesystem::path& path);

}  // namespace pnp
