#pragma once

#include <Eigen/Core>
#include <vector>

#include "sslam/rasterizer.hpp"

namespace sslam {

/// Per-pixel adjoints of a scalar loss with respect to the rendered color,
/// depth and normal buffers. Zero entries mean the pixel does not
/// contribute (masked).
struct LossGrads {
  ColorImage d_color;
  GrayImage d_depth;
  NormalImage d_normal;
};

/// Gradients per surfel, parallel to the map's surfel list. Quaternion
/// gradients are with respect to the raw (stored) coefficients in
/// (w, x, y, z) order, projected through the normalization.
struct SurfelGrads {
  std::vector<Eigen::Vector3d> p;
  std::vector<Eigen::Vector4d> q;
  std::vector<Eigen::Vector2d> log_s;
  std::vector<double> logit_alpha;
  std::vector<Eigen::Vector3d> color;

  void resize_zero(size_t n);
  void add(const SurfelGrads& other);
};

/// Gradient of the loss with respect to a left-multiplied twist increment at
/// the current pose: T <- exp(xi) * T. First three entries translational.
using PoseGrad = Vector6d;

/// Accumulates exact gradients of the rendered color/depth/normal (in the
/// configured depth mode, following the adaptive selection recorded in
/// `render`) into per-surfel parameter gradients. The per-pixel traversal is
/// replayed, so `pose`, `K` and `cfg` must match the forward call.
SurfelGrads backward_surfels(const SurfelMap& map, const Pose& pose,
                             const Intrinsics& K, const RenderOutput& render,
                             const LossGrads& grads, const RenderConfig& cfg);

/// Same replay, accumulating onto the camera-pose tangent instead. With
/// radial_enabled=false the depth-value gradient of each hit is routed
/// through the surfel center's z only, dropping the center-to-hit component
/// (the blend-weight path is unaffected).
PoseGrad backward_pose(const SurfelMap& map, const Pose& pose,
                       const Intrinsics& K, const RenderOutput& render,
                       const LossGrads& grads, const RenderConfig& cfg,
                       bool radial_enabled = true);

/// d(columns of R(q/|q|))/d(raw q) chained onto column gradients; helper
/// shared with tests.
Eigen::Vector4d quaternion_grad(const Eigen::Quaterniond& q_raw,
                                const Eigen::Vector3d& g_col0,
                                const Eigen::Vector3d& g_col1,
                                const Eigen::Vector3d& g_col2);

}  // namespace sslam
