#pragma once

#include <Eigen/Geometry>
#include <vector>

#include "sslam/frame.hpp"
#include "sslam/geometry.hpp"

namespace sslam {

struct RenderOutput;

/// Oriented 2D Gaussian disk. The rotation R = [t_u, t_v, t_w] is encoded as
/// a quaternion; scales and opacity are stored in unconstrained form
/// (log-scales, logit-opacity) so optimizer steps stay in-domain.
struct Surfel {
  Eigen::Vector3d p = Eigen::Vector3d::Zero();     // center, world frame
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Eigen::Vector2d log_s = Eigen::Vector2d::Zero();
  double logit_alpha = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();

  double su() const { return std::exp(log_s.x()); }
  double sv() const { return std::exp(log_s.y()); }
  double alpha() const { return 1.0 / (1.0 + std::exp(-logit_alpha)); }
  Eigen::Matrix3d rotation() const { return q.normalized().toRotationMatrix(); }
  Eigen::Vector3d tangent_u() const { return rotation().col(0); }
  Eigen::Vector3d tangent_v() const { return rotation().col(1); }
  Eigen::Vector3d normal() const { return rotation().col(2); }
};

/// Accumulated per-surfel reconstruction error, fed by mapping iterations
/// (each pixel's residual is attributed to its dominant surfel).
struct SurfelStats {
  double depth_err = 0.0;
  double color_err = 0.0;
  int count = 0;
};

struct ManagementConfig {
  double delta_T = 0.5;   // transmittance threshold for additions
  double delta_d = 0.1;   // depth-error threshold (m)
  double delta_c = 0.1;   // color-error threshold (intensity)
  int sample_stride = 6;  // pixel subsampling stride for additions
  double alpha_floor = 0.005;
};

class SurfelMap {
public:
  size_t size() const { return surfels_.size(); }
  bool empty() const { return surfels_.empty(); }

  Surfel& operator[](size_t i) { return surfels_[i]; }
  const Surfel& operator[](size_t i) const { return surfels_[i]; }

  std::vector<Surfel>& surfels() { return surfels_; }
  const std::vector<Surfel>& surfels() const { return surfels_; }
  std::vector<SurfelStats>& stats() { return stats_; }
  const std::vector<SurfelStats>& stats() const { return stats_; }

  void add(const Surfel& s) {
    surfels_.push_back(s);
    stats_.push_back({});
  }
  void clear() {
    surfels_.clear();
    stats_.clear();
  }
  void reset_stats() {
    std::fill(stats_.begin(), stats_.end(), SurfelStats{});
  }

  /// Radius of the surfel centers around their centroid; used to scale
  /// position learning rates. Returns 1 for maps with < 2 surfels.
  double extent() const;

private:
  std::vector<Surfel> surfels_;
  std::vector<SurfelStats> stats_;
};

/// Back-projects one pixel of a frame into a world-frame surfel. The surfel
/// normal takes the frame's normal (rotated to world), tangents are a
/// deterministic orthonormal completion and the footprint covers roughly
/// stride pixels at that depth. Throws std::invalid_argument on pixels with
/// invalid depth or normal.
Surfel seed_surfel(int col, int row, const Frame& frame, const Pose& pose,
                   const Intrinsics& K, int stride);

/// Adds surfels at stride-subsampled pixels failing any of the three
/// criteria: transmittance > delta_T, |rendered - input depth| > delta_d,
/// or per-pixel L1 color error > delta_c. Returns the number added.
int densify(SurfelMap& map, const Frame& frame, const RenderOutput& render,
            const Pose& pose, const Intrinsics& K, const ManagementConfig& cfg);

/// Removes surfels whose accumulated average depth/color error exceeds twice
/// the management thresholds, plus any below the opacity floor. Fills
/// old_to_new (new index or -1) when given so optimizer state can follow.
int prune(SurfelMap& map, const ManagementConfig& cfg,
          std::vector<int>* old_to_new = nullptr);

}  // namespace sslam
