#pragma once

#include <Eigen/Core>
#include <unordered_map>
#include <vector>

#include "sslam/trajectory_io.hpp"

namespace sslam {

enum class AlignMode { Rigid, Similarity };

struct AteResult {
  double rmse = 0.0, mean = 0.0, median = 0.0, max = 0.0;  // meters
  Eigen::Matrix4d alignment = Eigen::Matrix4d::Identity();  // est -> gt
  int pairs = 0;
};

/// Absolute trajectory error: associates poses by timestamp (0.02 s gap),
/// aligns estimated camera centers to ground truth with a closed-form
/// orthogonal-Procrustes fit (plus scale in Similarity mode), then reports
/// translational error statistics. Throws std::invalid_argument with fewer
/// than 3 associated pairs.
AteResult ate(const std::vector<TrajectoryEntry>& est,
              const std::vector<TrajectoryEntry>& gt,
              AlignMode mode = AlignMode::Rigid, double max_gap = 0.02);

struct GeomResult {
  double accuracy_cm = 0.0;    // mean NN distance pred -> gt
  double completion_cm = 0.0;  // mean NN distance gt -> pred
  double precision = 0.0;      // % of pred within threshold of gt
  double recall = 0.0;         // % of gt within threshold of pred
  double f1 = 0.0;             // harmonic mean, %
};

/// Exact nearest-neighbor point-cloud metrics via a uniform grid index with
/// expanding-shell search (identical results to brute force). Threshold in
/// meters. Throws std::invalid_argument on empty inputs.
GeomResult geom_metrics(const std::vector<Eigen::Vector3d>& pred,
                        const std::vector<Eigen::Vector3d>& gt,
                        double thresh = 0.03);

/// Uniform grid over points supporting exact nearest-neighbor distance
/// queries; used by geom_metrics and exposed for tests against brute force.
class GridIndex {
public:
  GridIndex(const std::vector<Eigen::Vector3d>& points, double cell);
  /// Distance to the nearest indexed point (exact).
  double nearest_distance(const Eigen::Vector3d& query) const;

private:
  const std::vector<Eigen::Vector3d>& points_;
  double cell_;
  std::unordered_map<uint64_t, std::vector<int>> cells_;
};

}  // namespace sslam
