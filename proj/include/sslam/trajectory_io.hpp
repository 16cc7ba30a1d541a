#pragma once

#include <string>
#include <vector>

#include "sslam/geometry.hpp"

namespace sslam {

/// One timestamped pose; `pose` is world-to-camera like everywhere else in
/// this library. The TUM text format stores the inverse (camera-to-world).
struct TrajectoryEntry {
  double timestamp = 0.0;
  Pose pose;
};

/// Lines "timestamp tx ty tz qx qy qz qw": timestamp with 6 decimals,
/// values with up to 9 significant digits.
void write_trajectory_tum(const std::string& path,
                          const std::vector<TrajectoryEntry>& traj);

std::vector<TrajectoryEntry> read_trajectory_tum(const std::string& path);

}  // namespace sslam
