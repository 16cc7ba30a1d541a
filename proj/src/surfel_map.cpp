#include "sslam/surfel_map.hpp"

#include <cmath>
#include <stdexcept>

#include "sslam/rasterizer.hpp"

namespace sslam {

double SurfelMap::extent() const {
  if (surfels_.size() < 2) return 1.0;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const Surfel& s : surfels_) centroid += s.p;
  centroid /= static_cast<double>(surfels_.size());
  double r2 = 0.0;
  for (const Surfel& s : surfels_) {
    r2 = std::max(r2, (s.p - centroid).squaredNorm());
  }
  return std::max(std::sqrt(r2), 1e-6);
}

Surfel seed_surfel(int col, int row, const Frame& frame, const Pose& pose,
                   const Intrinsics& K, int stride) {
  double depth = frame.depth.at(col, row);
  if (depth <= 0.0) {
    throw std::invalid_argument("seed_surfel: pixel has no depth");
  }
  Eigen::Vector3d n_cam = frame.normal.at(col, row);
  if (!normal_valid(n_cam)) {
    throw std::invalid_argument("seed_surfel: pixel has no normal");
  }

  Surfel s;
  Pose cam_to_world = pose.inverse();
  s.p = cam_to_world * backproject(col, row, depth, K);

  Eigen::Vector3d tw = (cam_to_world.R * n_cam).normalized();
  Eigen::Vector3d axis = std::abs(tw.x()) > 0.9 ? Eigen::Vector3d::UnitY()
                                                : Eigen::Vector3d::UnitX();
  Eigen::Vector3d tu = tw.cross(axis).normalized();
  Eigen::Vector3d tv = tw.cross(tu);
  Eigen::Matrix3d R;
  R.col(0) = tu;
  R.col(1) = tv;
  R.col(2) = tw;
  s.q = Eigen::Quaterniond(R).normalized();

  double scale = depth * stride / (0.5 * (K.fx + K.fy));
  s.log_s = Eigen::Vector2d::Constant(std::log(std::max(scale, 1e-6)));
  s.logit_alpha = 0.0;  // alpha = 0.5
  s.color = frame.color.at(col, row);
  return s;
}

int densify(SurfelMap& map, const Frame& frame, const RenderOutput& render,
            const Pose& pose, const Intrinsics& K,
            const ManagementConfig& cfg) {
  int added = 0;
  int stride = std::max(cfg.sample_stride, 1);
  for (int row = stride / 2; row < frame.height(); row += stride) {
    for (int col = stride / 2; col < frame.width(); col += stride) {
      double d_in = frame.depth.at(col, row);
      if (d_in <= 0 || !normal_valid(frame.normal.at(col, row))) continue;

      bool trigger = render.transmittance.at(col, row) > cfg.delta_T;
      if (!trigger && render.valid.at(col, row)) {
        trigger = std::abs(render.depth.at(col, row) - d_in) > cfg.delta_d;
      }
      if (!trigger) {
        Eigen::Vector3d dc =
            render.color.at(col, row) - frame.color.at(col, row);
        trigger = dc.cwiseAbs().mean() > cfg.delta_c;
      }
      if (!trigger) continue;

      map.add(seed_surfel(col, row, frame, pose, K, stride));
      ++added;
    }
  }
  return added;
}

int prune(SurfelMap& map, const ManagementConfig& cfg,
          std::vector<int>* old_to_new) {
  std::vector<Surfel>& surfels = map.surfels();
  std::vector<SurfelStats>& stats = map.stats();
  size_t n = surfels.size();
  if (old_to_new) old_to_new->assign(n, -1);

  size_t kept = 0;
  for (size_t i = 0; i < n; ++i) {
    const SurfelStats& st = stats[i];
    bool remove = surfels[i].alpha() < cfg.alpha_floor;
    if (!remove && st.count > 0) {
      double avg_d = st.depth_err / st.count;
      double avg_c = st.color_err / st.count;
      remove = avg_d > 2.0 * cfg.delta_d || avg_c > 2.0 * cfg.delta_c;
    }
    if (remove) continue;
    if (kept != i) {
      surfels[kept] = surfels[i];
      stats[kept] = stats[i];
    }
    if (old_to_new) (*old_to_new)[i] = static_cast<int>(kept);
    ++kept;
  }
  int removed = static_cast<int>(n - kept);
  surfels.resize(kept);
  stats.resize(kept);
  return removed;
}

}  // namespace sslam
