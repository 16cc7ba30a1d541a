#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "sslam/backward.hpp"
#include "sslam/frame.hpp"
#include "sslam/surfel_map.hpp"

namespace sslam {

enum class TrackerKind { Coupled, Icp };

struct TrackingConfig {
  double lambda_c = 0.5;  // color-term weight
  double lambda_d = 1.0;  // depth-term weight
  int iterations = 50;
  double lr_trans = 1e-3;  // adaptive step scale, translational components
  double lr_rot = 2e-3;    // adaptive step scale, rotational components
  bool radial_enabled = true;
  TrackerKind tracker = TrackerKind::Coupled;
  double min_valid_fraction = 0.01;  // below this coverage tracking aborts
};

/// Photometric + depth residual against one frame; same masking as the
/// mapping loss (color over all pixels, depth over mutually valid ones).
struct TrackingLoss {
  double total = 0.0;
  double color = 0.0;
  double depth = 0.0;
  long valid_pixels = 0;
  LossGrads grads;
};

TrackingLoss tracking_loss(const RenderOutput& render, const Frame& frame,
                           const TrackingConfig& cfg);

class TrackingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct TrackTraceRow {
  int iteration = 0;
  double total = 0.0, color = 0.0, depth = 0.0;
  long valid_pixels = 0;
};

struct TrackResult {
  Pose pose;
  double loss = 0.0;
  std::vector<TrackTraceRow> trace;
};

/// Gradient-based pose refinement: render → residual adjoints → pose
/// backward → adaptive-moment step on the 6 twist components, applied as a
/// left-multiplied increment. Evaluates iterations+1 candidate poses and
/// returns the best one observed. Throws TrackingError when rendered
/// coverage drops below cfg.min_valid_fraction of the image.
TrackResult track_frame(const SurfelMap& map, const Frame& frame,
                        const Pose& init_pose, const Intrinsics& K,
                        const TrackingConfig& cfg, const RenderConfig& rcfg);

/// Appends one frame's residual trace to a CSV log.
void append_track_trace(const std::string& path, int frame_id,
                        const std::vector<TrackTraceRow>& rows);

}  // namespace sslam
