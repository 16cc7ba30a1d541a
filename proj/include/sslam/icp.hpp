#pragma once

#include "sslam/frame.hpp"
#include "sslam/geometry.hpp"
#include "sslam/image.hpp"

namespace sslam {

struct IcpConfig {
  int levels = 3;                 // coarse-to-fine subsample strides 4, 2, 1
  int iterations_per_level = 10;
  double max_pair_distance = 0.1;           // meters
  double max_normal_angle = 30.0 * 3.14159265358979323846 / 180.0;  // radians
  int min_pairs = 100;            // required at the coarsest level
};

/// Projective-association point-to-plane alignment of `frame` against a
/// model depth/normal pair expressed in the camera at `init_pose`. Each
/// iteration solves the 6x6 normal equations; rank-deficient systems fall
/// back to the least-norm update. Returns the refined world-to-camera pose
/// of `frame`. Throws std::runtime_error when the coarsest level yields
/// fewer than cfg.min_pairs correspondences.
Pose icp_track(const Frame& frame, const GrayImage& model_depth,
               const NormalImage& model_normal, const Pose& init_pose,
               const Intrinsics& K, const IcpConfig& cfg = {});

}  // namespace sslam
