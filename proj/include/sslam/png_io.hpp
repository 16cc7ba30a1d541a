#pragma once

#include <cstdint>
#include <string>

#include "sslam/image.hpp"

namespace sslam {

/// 8-bit PNG (gray/palette/alpha inputs normalized to RGB) as [0,1] doubles.
ColorImage read_png_color(const std::string& path);

/// 16-bit grayscale PNG as raw counts (no unit conversion).
Image<uint16_t> read_png_gray16(const std::string& path);

void write_png_color(const std::string& path, const ColorImage& img);
void write_png_gray16(const std::string& path, const Image<uint16_t>& img);

}  // namespace sslam
