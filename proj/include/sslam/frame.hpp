#pragma once

#include "sslam/geometry.hpp"
#include "sslam/image.hpp"

namespace sslam {

/// One RGB-D observation. Depth 0 marks invalid pixels; the normal map is
/// derived from depth and carries the zero vector where invalid.
struct Frame {
  double timestamp = 0.0;
  ColorImage color;
  GrayImage depth;
  NormalImage normal;

  int width() const { return color.width(); }
  int height() const { return color.height(); }
};

inline Frame make_frame(double timestamp, ColorImage color, GrayImage depth,
                        const Intrinsics& K) {
  Frame f;
  f.timestamp = timestamp;
  f.normal = compute_normal_map(depth, K);
  f.color = std::move(color);
  f.depth = std::move(depth);
  return f;
}

}  // namespace sslam
