#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sslam/mapping.hpp"
#include "sslam/surfel_map.hpp"
#include "sslam/synthetic.hpp"
#include "sslam/tracking.hpp"

namespace sslam {

/// Convergence-basin sweep: how far an initial pose can be displaced and
/// still be pulled back onto the target view by gradient descent alone.
struct BasinConfig {
  std::vector<double> radii = {0.2, 0.4, 0.8, 1.2, 1.6};  // displacement (m)
  int trials_per_radius = 20;
  int steps = 1000;              // pose-optimization steps per trial
  double success_radius = 0.01;  // final camera-center distance rule (m)
  double early_exit_radius = 0.002;  // stop a trial once clearly converged
  int target_view = 4;           // index into the scene's trajectory
  // The per-frame tracking rates are sized for centimetre inter-frame motion;
  // basin trials start up to metres away, so they anneal from a coarse rate
  // down to a fine one over the step budget.
  double lr_trans_start = 2e-2, lr_trans_end = 5e-4;
  double lr_rot_start = 1e-2, lr_rot_end = 2.5e-4;
  uint64_t seed = 7;             // rotates the direction lattice
  int train_iterations = 150;    // per mapping window while building the map
  int threads = 0;
};

struct BasinRow {
  double radius = 0.0;
  int trials = 0;
  int success_radial_on = 0;
  int success_radial_off = 0;
  double rate_radial_on = 0.0;
  double rate_radial_off = 0.0;
};

/// Builds a map from the scene's grid views only: seed-densify every view,
/// then two mapping windows with a management pass between them.
SurfelMap train_basin_map(const SyntheticScene& scene,
                          const std::vector<Frame>& frames,
                          const BasinConfig& cfg, const MappingConfig& mcfg,
                          const ManagementConfig& mgmt,
                          const RenderConfig& rcfg);

/// Runs the sweep on a trained map. Each trial starts on a sphere of the
/// given radius around the target view's camera center (deterministic
/// golden-spiral directions, shared across the two variants), oriented
/// looking at the scene centroid, and descends the tracking loss with the
/// radial depth gradient enabled or disabled. Success = final camera center
/// within cfg.success_radius of the target.
std::vector<BasinRow> basin_sweep(const SurfelMap& map,
                                  const SyntheticScene& scene,
                                  const Frame& target_frame,
                                  const BasinConfig& cfg,
                                  const TrackingConfig& tcfg,
                                  const RenderConfig& rcfg);

void write_basin_csv(const std::string& path,
                     const std::vector<BasinRow>& rows);

}  // namespace sslam
