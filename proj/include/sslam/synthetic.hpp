#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sslam/frame.hpp"
#include "sslam/geometry.hpp"

namespace sslam {

/// Finite textured rectangle: points origin + a*eu + b*ev for a,b in [0,1].
/// The texture is a checker of the two colors modulated by a smooth wave so
/// photometric gradients never vanish inside a cell.
struct TexturedPlane {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d eu = Eigen::Vector3d::UnitX();
  Eigen::Vector3d ev = Eigen::Vector3d::UnitY();
  Eigen::Vector3d color_a = Eigen::Vector3d(0.8, 0.8, 0.8);
  Eigen::Vector3d color_b = Eigen::Vector3d(0.25, 0.25, 0.25);
  double checker = 0.3;  // cell edge, meters
};

/// Analytic scene with a ground-truth trajectory. World axes follow the
/// camera convention of the first view: x right, y down, z forward.
struct SyntheticScene {
  std::string name;
  std::vector<TexturedPlane> planes;
  std::vector<Pose> trajectory;  // world-to-camera per frame
  Intrinsics K;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();  // look-at anchor
  double fps = 30.0;
};

struct RayHit {
  double t = 0.0;  // distance along the (unnormalized) ray parameter
  int plane = -1;
  double a = 0.0, b = 0.0;  // rectangle coordinates in [0,1]
};

/// Nearest rectangle along origin + t*dir, t > 1e-6.
std::optional<RayHit> raycast(const SyntheticScene& scene,
                              const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& dir);

Eigen::Vector3d plane_color(const TexturedPlane& plane, double a, double b);

/// World-to-camera pose with the optical axis through `target`, roll fixed
/// by the world down direction (+y).
Pose look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target);

/// Named fixtures with pinned geometry, intrinsics and trajectories:
///   box50 — room corner with a box, 50-frame smooth sweep, 320x240
///   edge  — box face edge in front of a rear wall, single view, 200x150
///   basin — two-box corner for convergence-basin studies, 3x3 grid, 160x120
///   plane — fronto-parallel plane, single view, 160x120
///   tilt  — plane tilted 35 degrees about x, single view, 160x120
/// Throws std::invalid_argument for unknown names.
SyntheticScene make_scene(const std::string& name);

/// Exact ray-cast of the scene: depth in meters (0 where no surface),
/// camera-frame analytic normals oriented toward the camera. Optional
/// Gaussian depth noise and invalid-pixel dropout (both deterministic under
/// `seed`). Color is always noise-free.
Frame render_synthetic(const SyntheticScene& scene, const Pose& pose,
                       const Intrinsics& K, double noise_sigma = 0.0,
                       double dropout = 0.0, uint64_t seed = 0,
                       double timestamp = 0.0);

}  // namespace sslam
