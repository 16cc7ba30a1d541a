#pragma once

#include <cstdint>
#include <string>

#include "sslam/basin.hpp"
#include "sslam/pipeline.hpp"

namespace sslam {

/// Where frames come from and how raw data maps to metric units.
struct DatasetConfig {
  std::string source;          // TUM-layout directory or "synthetic:<name>"
  double fx = 525.0, fy = 525.0, cx = 319.5, cy = 239.5;
  int width = 640, height = 480;
  double depth_scale = 5000.0;  // raw 16-bit counts per meter
  double noise_sigma = 0.0;     // synthetic depth noise (m)
  double dropout = 0.0;         // synthetic invalid-pixel fraction
  uint64_t seed = 1;            // synthetic noise seed
  int max_frames = -1;          // cap on frames processed (-1 = all)
};

struct OutputConfig {
  std::string dir = "out";
  int pointcloud_stride = 2;
};

/// Everything a run needs, grouped the same way as the JSON config file
/// (one object per section; see docs/formats.md for the key list).
struct FullConfig {
  DatasetConfig dataset;
  RenderConfig render;
  MappingConfig mapping;
  TrackingConfig tracking;
  ManagementConfig management;
  KeyframeConfig keyframe;
  IcpConfig icp;
  BasinConfig basin;
  OutputConfig output;

  PipelineConfig pipeline() const {
    return {mapping, tracking, management, render, keyframe, icp};
  }
  Intrinsics intrinsics() const {
    return {dataset.fx, dataset.fy, dataset.cx, dataset.cy, dataset.width,
            dataset.height};
  }
};

DepthMode parse_depth_mode(const std::string& s);    // "mean|median|adaptive"
std::string to_string(DepthMode mode);
TrackerKind parse_tracker(const std::string& s);     // "coupled|icp"
std::string to_string(TrackerKind kind);

/// Reads a JSON config. Absent sections/keys keep their defaults; unknown
/// keys are an error (they are always typos).
FullConfig load_config(const std::string& path);

/// Applies SSLAM_<SECTION>_<KEY> environment overrides (e.g.
/// SSLAM_TRACKING_ITERATIONS=30, SSLAM_BASIN_RADII=0.2,0.4). Returns the
/// number of overrides applied.
int apply_env_overrides(FullConfig& cfg);

/// Writes the full effective config (every key explicit) as pretty JSON.
void save_config(const FullConfig& cfg, const std::string& path);

}  // namespace sslam
