#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "sslam/image.hpp"

namespace sslam {

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Pinhole camera model. Pixel centers sit at integer coordinates; the ray
/// through pixel (col, row) has camera-frame direction
/// ((col-cx)/fx, (row-cy)/fy, 1).
struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  bool valid() const {
    return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height &&
           width > 0 && height > 0;
  }
  Eigen::Vector3d ray(double col, double row) const {
    return {(col - cx) / fx, (row - cy) / fy, 1.0};
  }
  Intrinsics scaled(int factor) const {
    return {fx / factor, fy / factor, cx / factor, cy / factor,
            width / factor, height / factor};
  }
};

/// Rigid world-to-camera transform: x_cam = R * x_world + t.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& x_world) const {
    return R * x_world + t;
  }
  Pose operator*(const Pose& other) const {
    return {R * other.R, R * other.t + t};
  }
  Pose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }

  /// Camera center in world coordinates.
  Eigen::Vector3d center() const { return -(R.transpose() * t); }

  /// Rotation orthonormal and proper within tol.
  bool is_valid(double tol = 1e-9) const;
};

/// se(3) tangent vector: first three entries translational (meters), last
/// three rotational (radians).
using Twist = Vector6d;

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& phi);
Eigen::Vector3d log_so3(const Eigen::Matrix3d& R);

Pose exp_se3(const Twist& xi);

/// Inverse of exp_se3 on the domain |phi| < pi. Throws std::domain_error for
/// rotations at pi, where the axis is ambiguous.
Twist log_se3(const Pose& T);

/// Rotation angle between two poses (geodesic distance on SO(3)).
double rotation_angle(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb);

/// Camera-frame point of pixel (col, row) at the given depth.
/// Throws std::invalid_argument when depth <= 0.
Eigen::Vector3d backproject(double col, double row, double depth,
                            const Intrinsics& K);

/// Pixel coordinates of a camera-frame point (z > 0 assumed).
Eigen::Vector2d project(const Eigen::Vector3d& p_cam, const Intrinsics& K);

/// Per-pixel unit normals from central differences of back-projected depth,
/// oriented toward the camera (n . ray < 0). Pixels with depth 0, border
/// pixels, and pixels with any invalid 4-neighbor get the zero vector.
NormalImage compute_normal_map(const GrayImage& depth, const Intrinsics& K);

inline bool normal_valid(const Eigen::Vector3d& n) { return n.squaredNorm() > 0.25; }

}  // namespace sslam
