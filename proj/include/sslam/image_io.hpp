#pragma once

#include <string>

#include "sslam/image.hpp"

namespace sslam {

/// Binary P6, 8-bit; values clamped to [0,1].
void write_ppm(const std::string& path, const ColorImage& img);
ColorImage read_ppm(const std::string& path);

/// Binary P5, 16-bit big-endian (netpbm convention). `scale` converts image
/// values to counts (e.g. 5000 counts per meter); counts clamp at 65535.
void write_pgm16(const std::string& path, const GrayImage& img, double scale);
GrayImage read_pgm16(const std::string& path, double scale);

}  // namespace sslam
