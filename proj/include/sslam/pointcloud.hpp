#pragma once

#include <Eigen/Core>
#include <vector>

namespace sslam {

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;
  std::vector<Eigen::Vector3d> colors;  // [0,1]
  size_t size() const { return points.size(); }
};

}  // namespace sslam
