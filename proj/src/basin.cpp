#include "sslam/basin.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "sslam/adam.hpp"
#include "sslam/backward.hpp"
#include "sslam/parallel.hpp"
#include "sslam/rasterizer.hpp"

namespace sslam {

namespace {

/// Golden-spiral unit directions: near-uniform, deterministic, and indexed by
/// trial so the radial-on and radial-off runs start from identical poses.
Eigen::Vector3d lattice_direction(int i, int n, double phase) {
  double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  double a = golden * static_cast<double>(i) + phase;
  return {r * std::cos(a), r * std::sin(a), z};
}

}  // namespace

SurfelMap train_basin_map(const SyntheticScene& scene,
                          const std::vector<Frame>& frames,
                          const BasinConfig& cfg, const MappingConfig& mcfg,
                          const ManagementConfig& mgmt,
                          const RenderConfig& rcfg) {
  if (frames.size() != scene.trajectory.size())
    throw std::invalid_argument("train_basin_map: frame/trajectory size mismatch");
  if (frames.empty())
    throw std::invalid_argument("train_basin_map: no training views");

  SurfelMap map;
  for (size_t i = 0; i < frames.size(); ++i) {
    RenderOutput ro = render(map, scene.trajectory[i], scene.K, rcfg);
    densify(map, frames[i], ro, scene.trajectory[i], scene.K, mgmt);
  }

  MapOptimizer opt;
  std::vector<const Frame*> fptrs;
  std::vector<int> ids;
  for (size_t i = 0; i < frames.size(); ++i) {
    fptrs.push_back(&frames[i]);
    ids.push_back(static_cast<int>(i));
  }
  optimize_window(map, opt, fptrs, scene.trajectory, ids, scene.K, mcfg, rcfg,
                  cfg.train_iterations);

  // One management round at the target view, then a second window to settle
  // the refreshed map.
  size_t tv = static_cast<size_t>(
      std::clamp<int>(cfg.target_view, 0, static_cast<int>(frames.size()) - 1));
  {
    RenderOutput ro = render(map, scene.trajectory[tv], scene.K, rcfg);
    densify(map, frames[tv], ro, scene.trajectory[tv], scene.K, mgmt);
    opt.on_densify(map.size());
    std::vector<int> old_to_new;
    prune(map, mgmt, &old_to_new);
    opt.on_prune(old_to_new);
    map.reset_stats();
  }
  optimize_window(map, opt, fptrs, scene.trajectory, ids, scene.K, mcfg, rcfg,
                  cfg.train_iterations);
  return map;
}

std::vector<BasinRow> basin_sweep(const SurfelMap& map,
                                  const SyntheticScene& scene,
                                  const Frame& target_frame,
                                  const BasinConfig& cfg,
                                  const TrackingConfig& tcfg,
                                  const RenderConfig& rcfg) {
  if (scene.trajectory.empty())
    throw std::invalid_argument("basin_sweep: scene has no trajectory");
  if (cfg.trials_per_radius <= 0 || cfg.radii.empty())
    throw std::invalid_argument("basin_sweep: need radii and trials");

  size_t tv = static_cast<size_t>(std::clamp<int>(
      cfg.target_view, 0, static_cast<int>(scene.trajectory.size()) - 1));
  const Eigen::Vector3d target_c = scene.trajectory[tv].center();
  const double phase =
      static_cast<double>(cfg.seed % 997) * (2.0 * std::numbers::pi / 997.0);

  const int n_t = cfg.trials_per_radius;
  const int total = static_cast<int>(cfg.radii.size()) * n_t * 2;
  std::vector<uint8_t> succeeded(static_cast<size_t>(total), 0);

  RenderConfig rc = rcfg;
  if (resolve_threads(cfg.threads) > 1) rc.threads = 1;  // trials fill the cores

  parallel_for(total, cfg.threads, [&](int task, int /*worker*/) {
    const bool radial = task % 2 == 0;
    const int trial = (task / 2) % n_t;
    const size_t ri = static_cast<size_t>(task / (2 * n_t));

    Eigen::Vector3d dir = lattice_direction(trial, n_t, phase);
    Pose pose = look_at(target_c + cfg.radii[ri] * dir, scene.centroid);

    Adam trans_adam, rot_adam;
    const double denom = std::max(cfg.steps - 1, 1);
    for (int s = 0; s < cfg.steps; ++s) {
      if ((pose.center() - target_c).norm() < cfg.early_exit_radius) break;
      RenderOutput out = render(map, pose, scene.K, rc);
      TrackingLoss loss = tracking_loss(out, target_frame, tcfg);
      PoseGrad g =
          backward_pose(map, pose, scene.K, out, loss.grads, rc, radial);
      const double f = static_cast<double>(s) / denom;
      const double lr_t =
          cfg.lr_trans_start * std::pow(cfg.lr_trans_end / cfg.lr_trans_start, f);
      const double lr_r =
          cfg.lr_rot_start * std::pow(cfg.lr_rot_end / cfg.lr_rot_start, f);
      Twist xi = Twist::Zero();
      trans_adam.step(xi.data(), g.data(), 3, lr_t);
      rot_adam.step(xi.data() + 3, g.data() + 3, 3, lr_r);
      if (!xi.allFinite()) break;
      pose = exp_se3(xi) * pose;
    }
    succeeded[static_cast<size_t>(task)] =
        (pose.center() - target_c).norm() < cfg.success_radius ? 1 : 0;
  });

  std::vector<BasinRow> rows;
  for (size_t ri = 0; ri < cfg.radii.size(); ++ri) {
    BasinRow row;
    row.radius = cfg.radii[ri];
    row.trials = n_t;
    for (int trial = 0; trial < n_t; ++trial) {
      int base = static_cast<int>(ri) * n_t * 2 + trial * 2;
      row.success_radial_on += succeeded[static_cast<size_t>(base)];
      row.success_radial_off += succeeded[static_cast<size_t>(base + 1)];
    }
    row.rate_radial_on = static_cast<double>(row.success_radial_on) / n_t;
    row.rate_radial_off = static_cast<double>(row.success_radial_off) / n_t;
    rows.push_back(row);
  }
  return rows;
}

void write_basin_csv(const std::string& path,
                     const std::vector<BasinRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_basin_csv: cannot open " + path);
  f << "radius,trials,success_radial_on,success_radial_off,"
       "rate_radial_on,rate_radial_off\n";
  for (const BasinRow& r : rows)
    f << r.radius << ',' << r.trials << ',' << r.success_radial_on << ','
      << r.success_radial_off << ',' << r.rate_radial_on << ','
      << r.rate_radial_off << '\n';
}

}  // namespace sslam
