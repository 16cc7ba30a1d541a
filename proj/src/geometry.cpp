#include "sslam/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace sslam {

namespace {
constexpr double kSmallAngle = 1e-6;  // series switch for exp/log
}

bool Pose::is_valid(double tol) const {
  double ortho = (R.transpose() * R - Eigen::Matrix3d::Identity()).norm();
  return ortho < tol && std::abs(R.determinant() - 1.0) < tol;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
      -v.y(), v.x(), 0;
  return s;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& phi) {
  double theta = phi.norm();
  Eigen::Matrix3d W = skew(phi);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + W + 0.5 * W * W;
  }
  double s = std::sin(theta) / theta;
  double c = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + s * W + c * W * W;
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& R) {
  double tr = R.trace();
  double cos_theta = std::clamp(0.5 * (tr - 1.0), -1.0, 1.0);
  double theta = std::acos(cos_theta);
  if (theta > M_PI - 1e-9) {
    throw std::domain_error("log_so3: rotation angle at pi, axis ambiguous");
  }
  Eigen::Vector3d w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  if (theta < kSmallAngle) {
    return 0.5 * w;
  }
  return (theta / (2.0 * std::sin(theta))) * w;
}

namespace {

// V matrix of the SE(3) exponential: t = V * rho.
Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& phi) {
  double theta = phi.norm();
  Eigen::Matrix3d W = skew(phi);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + 0.5 * W + W * W / 6.0;
  }
  double t2 = theta * theta;
  double a = (1.0 - std::cos(theta)) / t2;
  double b = (theta - std::sin(theta)) / (t2 * theta);
  return Eigen::Matrix3d::Identity() + a * W + b * W * W;
}

Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& phi) {
  double theta = phi.norm();
  Eigen::Matrix3d W = skew(phi);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() - 0.5 * W + W * W / 12.0;
  }
  double half = 0.5 * theta;
  double cot = std::cos(half) / std::sin(half);
  double c = (1.0 - half * cot) / (theta * theta);
  return Eigen::Matrix3d::Identity() - 0.5 * W + c * W * W;
}

}  // namespace

Pose exp_se3(const Twist& xi) {
  Eigen::Vector3d rho = xi.head<3>();
  Eigen::Vector3d phi = xi.tail<3>();
  Pose T;
  T.R = exp_so3(phi);
  T.t = so3_left_jacobian(phi) * rho;
  return T;
}

Twist log_se3(const Pose& T) {
  Eigen::Vector3d phi = log_so3(T.R);
  Eigen::Vector3d rho = so3_left_jacobian_inverse(phi) * T.t;
  Twist xi;
  xi << rho, phi;
  return xi;
}

double rotation_angle(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb) {
  double tr = (Ra.transpose() * Rb).trace();
  return std::acos(std::clamp(0.5 * (tr - 1.0), -1.0, 1.0));
}

Eigen::Vector3d backproject(double col, double row, double depth,
                            const Intrinsics& K) {
  if (depth <= 0.0) {
    throw std::invalid_argument("backproject: depth must be positive");
  }
  return depth * K.ray(col, row);
}

Eigen::Vector2d project(const Eigen::Vector3d& p, const Intrinsics& K) {
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

NormalImage compute_normal_map(const GrayImage& depth, const Intrinsics& K) {
  NormalImage normals(depth.width(), depth.height(), Eigen::Vector3d::Zero());
  for (int row = 1; row + 1 < depth.height(); ++row) {
    for (int col = 1; col + 1 < depth.width(); ++col) {
      double d = depth.at(col, row);
      double dl = depth.at(col - 1, row), dr = depth.at(col + 1, row);
      double du = depth.at(col, row - 1), dd = depth.at(col, row + 1);
      if (d <= 0 || dl <= 0 || dr <= 0 || du <= 0 || dd <= 0) continue;
      Eigen::Vector3d px = dr * K.ray(col + 1, row) - dl * K.ray(col - 1, row);
      Eigen::Vector3d py = dd * K.ray(col, row + 1) - du * K.ray(col, row - 1);
      Eigen::Vector3d n = px.cross(py);
      double len = n.norm();
      if (len < 1e-12) continue;
      n /= len;
      if (n.dot(K.ray(col, row)) > 0) n = -n;
      normals.at(col, row) = n;
    }
  }
  return normals;
}

}  // namespace sslam
