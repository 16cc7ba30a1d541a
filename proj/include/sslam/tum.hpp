#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sslam/frame.hpp"
#include "sslam/trajectory_io.hpp"

namespace sslam {

struct TumRecord {
  double timestamp = 0.0;
  std::string path;  // relative to the sequence directory
};

/// A TUM-RGBD sequence: timestamp-associated rgb/depth pairs plus the raw
/// ground-truth trajectory when present. Images are decoded lazily.
struct TumSequence {
  std::string dir;
  std::vector<std::pair<TumRecord, TumRecord>> pairs;  // (rgb, depth)
  std::vector<TrajectoryEntry> groundtruth;
  int dropped = 0;       // index entries without a partner within the gap
  double depth_scale = 5000.0;  // counts per meter

  size_t size() const { return pairs.size(); }
  /// Decodes pair i and derives the normal map. Timestamp from the rgb entry.
  Frame load_frame(size_t i, const Intrinsics& K) const;
};

/// Reads rgb.txt / depth.txt (and groundtruth.txt when present), associating
/// entries by nearest timestamp with a 0.02 s maximum gap, greedily smallest
/// difference first; unmatched entries are dropped and counted.
TumSequence load_tum(const std::string& dir);

/// Greedy nearest-timestamp matching, exposed for reuse and tests. Returns
/// index pairs (i into a, j into b), sorted by the timestamp of a.
std::vector<std::pair<size_t, size_t>> associate_timestamps(
    const std::vector<double>& a, const std::vector<double>& b,
    double max_gap = 0.02);

/// Default calibration of the TUM Freiburg sequences (ROS camera defaults).
Intrinsics tum_default_intrinsics();

}  // namespace sslam
