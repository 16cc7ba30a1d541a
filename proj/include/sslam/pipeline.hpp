#pragma once

#include <deque>
#include <utility>
#include <vector>

#include "sslam/icp.hpp"
#include "sslam/mapping.hpp"
#include "sslam/pointcloud.hpp"
#include "sslam/tracking.hpp"

namespace sslam {

struct KeyframeConfig {
  double delta_r = 0.35;  // geodesic rotation threshold, radians
  double delta_t = 0.3;   // camera-center distance threshold, meters
};

struct PipelineConfig {
  MappingConfig mapping;
  TrackingConfig tracking;
  ManagementConfig management;
  RenderConfig render;
  KeyframeConfig keyframe;
  IcpConfig icp;
};

struct Keyframe {
  int id = 0;
  Frame frame;
  Pose pose;
};

/// Sequential SLAM driver: frame 0 seeds the map and runs a bootstrap
/// mapping window; later frames are tracked from the previous pose, promoted
/// to keyframes on sufficient motion (keyframe-triggered window over all
/// keyframes) or swept into a scheduled window over the recent frames every
/// map_every frames. Surfel insertion/removal runs at window boundaries.
class SlamSystem {
public:
  SlamSystem(const Intrinsics& K, const PipelineConfig& cfg);

  /// Ingests the next frame. Tracking failures are rethrown as
  /// TrackingError with the frame id prepended.
  void process_frame(const Frame& frame);

  /// Final refinement over all keyframes with
  /// final_refine_multiplier x iterations_per_window iterations.
  void finalize();

  const std::vector<Pose>& trajectory() const { return trajectory_; }
  const std::vector<double>& timestamps() const { return timestamps_; }
  const SurfelMap& map() const { return map_; }
  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  const Intrinsics& intrinsics() const { return K_; }
  int frames_processed() const { return frame_counter_; }

  /// World-frame points/normals/colors back-projected from keyframe renders
  /// on a `stride`-subsampled grid, deduplicated on a 1 cm voxel hash.
  PointCloud export_pointcloud(int stride = 2) const;

  const std::vector<LossTraceRow>& mapping_trace() const {
    return mapping_trace_;
  }
  const std::vector<std::pair<int, TrackTraceRow>>& track_trace() const {
    return track_trace_;
  }

private:
  void run_window(bool keyframe_window, const Frame& trigger,
                  const Pose& trigger_pose);

  Intrinsics K_;
  PipelineConfig cfg_;
  SurfelMap map_;
  MapOptimizer opt_;
  std::vector<Keyframe> keyframes_;
  std::deque<Keyframe> recent_;
  std::vector<Pose> trajectory_;
  std::vector<double> timestamps_;
  std::vector<LossTraceRow> mapping_trace_;
  std::vector<std::pair<int, TrackTraceRow>> track_trace_;
  int frame_counter_ = 0;
};

}  // namespace sslam
