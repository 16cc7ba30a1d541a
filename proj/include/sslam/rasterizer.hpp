#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "sslam/geometry.hpp"
#include "sslam/image.hpp"
#include "sslam/surfel_map.hpp"

namespace sslam {

enum class DepthMode { Mean, Median, Adaptive };

/// Test/diagnostic hook: when set, the depth value of every ray-surfel hit is
/// replaced by (camera-frame center z + stored offset), with offsets captured
/// from a reference render. Keeps the blend weights intact, so a finite
/// difference over this variant isolates the center path of the depth
/// gradient from the radial one.
struct DepthOffsetHook {
  enum class Mode { Capture, Apply } mode = Mode::Capture;
  // key = pixel_index * map_size + surfel_id
  std::unordered_map<uint64_t, double> offsets;
};

struct RenderConfig {
  double tau = 5e-6;            // distortion threshold for Adaptive mode
  DepthMode depth_mode = DepthMode::Adaptive;
  double gauss_cutoff = 9.0;    // max u^2+v^2 evaluated
  double t_min = 1e-4;          // early-stop transmittance (0 disables)
  double alpha_min = 1.0 / 255.0;  // per-hit contribution floor (0 disables)
  double near_z = 0.01;         // near plane (m)
  double valid_alpha = 0.05;    // alpha_sum above this marks a pixel valid
  int tile_size = 16;
  int threads = 0;              // 0 = all cores
  DepthOffsetHook* depth_offset = nullptr;
};

/// One ray-surfel hit. (u, v) are in the surfel's scaled tangent basis, z is
/// the camera-frame depth of the hit point.
struct Intersection {
  int surfel = -1;
  double u = 0, v = 0, z = 0;
  double gauss = 0;   // exp(-(u^2+v^2)/2)
  double weight = 0;  // alpha * gauss * transmittance at blend time
};

struct RenderOutput {
  int width = 0, height = 0;
  ColorImage color;
  GrayImage depth;           // per depth_mode
  NormalImage normal;        // alpha-blended, unnormalized, camera frame
  GrayImage distortion;      // pairwise depth spread per pixel
  GrayImage transmittance;   // final T
  GrayImage alpha_sum;       // sum of blend weights
  Image<int> dominant_id;    // surfel of the max-weight hit (-1 if none)
  GrayImage dominant_depth;
  NormalImage dominant_normal;
  MaskImage valid;           // alpha_sum > valid_alpha
  MaskImage substituted;     // Adaptive mode picked the dominant surfel
};

/// Surfel transformed into the camera frame, with screen-space culling bounds.
struct CameraSurfel {
  Eigen::Vector3d center;          // R * p + t
  Eigen::Vector3d tu, tv, tw;      // rotated unit tangent frame
  double su = 0, sv = 0;
  double alpha = 0;
  Eigen::Vector3d color;
  int id = -1;
};

CameraSurfel to_camera(const Surfel& s, const Pose& pose, int id);

/// Ray-plane intersection against one surfel. Returns nullopt when the plane
/// is parallel to the ray, behind the near plane, or outside gauss_cutoff.
std::optional<Intersection> intersect(const CameraSurfel& s,
                                      const Eigen::Vector3d& ray,
                                      const RenderConfig& cfg);

/// Convenience overload matching the world-frame surfel plus pose.
std::optional<Intersection> intersect(const Surfel& s,
                                      const Eigen::Vector3d& ray,
                                      const Pose& pose,
                                      const RenderConfig& cfg = {});

/// Pairwise depth spread sum_{i,j} w_i w_j |z_i - z_j| over ordered pairs,
/// computed in one pass over a depth-sorted copy.
double distortion_term(std::span<const double> weights,
                       std::span<const double> depths);

RenderOutput render(const SurfelMap& map, const Pose& pose,
                    const Intrinsics& K, const RenderConfig& cfg);

/// Per-image candidate lists shared by the forward and backward passes:
/// surfels transformed to camera, sorted front-to-back by center depth and
/// binned into tiles.
struct RenderContext {
  std::vector<CameraSurfel> cam_surfels;       // sorted by center z
  std::vector<std::vector<int>> tile_lists;    // indices into cam_surfels
  int tiles_x = 0, tiles_y = 0;
};

RenderContext build_render_context(const SurfelMap& map, const Pose& pose,
                                   const Intrinsics& K,
                                   const RenderConfig& cfg);

}  // namespace sslam
