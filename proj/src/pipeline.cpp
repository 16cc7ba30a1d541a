#include "sslam/pipeline.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_set>

#include "sslam/rasterizer.hpp"

namespace sslam {

namespace {
constexpr double kVoxelSize = 0.01;  // point-cloud dedup resolution, meters

uint64_t voxel_key(const Eigen::Vector3d& p) {
  // 21 bits per axis around the origin covers +-10 km at 1 cm.
  auto quant = [](double x) {
    return static_cast<uint64_t>(
               static_cast<int64_t>(std::floor(x / kVoxelSize)) + (1 << 20)) &
           0x1FFFFF;
  };
  return (quant(p.x()) << 42) | (quant(p.y()) << 21) | quant(p.z());
}
}  // namespace

SlamSystem::SlamSystem(const Intrinsics& K, const PipelineConfig& cfg)
    : K_(K), cfg_(cfg) {
  if (!K.valid()) throw std::invalid_argument("SlamSystem: bad intrinsics");
}

void SlamSystem::run_window(bool keyframe_window, const Frame& trigger,
                            const Pose& trigger_pose) {
  std::vector<const Frame*> frames;
  std::vector<Pose> poses;
  std::vector<int> ids;
  if (keyframe_window) {
    for (const Keyframe& kf : keyframes_) {
      frames.push_back(&kf.frame);
      poses.push_back(kf.pose);
      ids.push_back(kf.id);
    }
  } else {
    for (const Keyframe& kf : recent_) {
      frames.push_back(&kf.frame);
      poses.push_back(kf.pose);
      ids.push_back(kf.id);
    }
  }

  std::vector<LossTraceRow> rows = optimize_window(
      map_, opt_, frames, poses, ids, K_, cfg_.mapping, cfg_.render);
  mapping_trace_.insert(mapping_trace_.end(), rows.begin(), rows.end());

  // Surfel lifecycle at the window boundary, against the triggering frame.
  RenderOutput rendered = render(map_, trigger_pose, K_, cfg_.render);
  densify(map_, trigger, rendered, trigger_pose, K_, cfg_.management);
  opt_.on_densify(map_.size());
  std::vector<int> remap;
  if (prune(map_, cfg_.management, &remap) > 0) opt_.on_prune(remap);
  map_.reset_stats();
}

void SlamSystem::process_frame(const Frame& frame) {
  int id = frame_counter_++;

  if (id == 0) {
    Pose identity;
    trajectory_.push_back(identity);
    timestamps_.push_back(frame.timestamp);
    RenderOutput rendered = render(map_, identity, K_, cfg_.render);
    densify(map_, frame, rendered, identity, K_, cfg_.management);
    opt_.on_densify(map_.size());
    keyframes_.push_back({0, frame, identity});
    recent_.push_back({0, frame, identity});
    run_window(/*keyframe_window=*/true, frame, identity);
    return;
  }

  Pose init = trajectory_.back();
  Pose pose;
  if (cfg_.tracking.tracker == TrackerKind::Icp) {
    RenderOutput model = render(map_, init, K_, cfg_.render);
    pose = icp_track(frame, model.depth, model.normal, init, K_, cfg_.icp);
  } else {
    try {
      TrackResult tr =
          track_frame(map_, frame, init, K_, cfg_.tracking, cfg_.render);
      pose = tr.pose;
      for (const TrackTraceRow& row : tr.trace) track_trace_.push_back({id, row});
    } catch (const TrackingError& e) {
      throw TrackingError("frame " + std::to_string(id) + ": " + e.what());
    }
  }
  trajectory_.push_back(pose);
  timestamps_.push_back(frame.timestamp);

  recent_.push_back({id, frame, pose});
  while (recent_.size() > static_cast<size_t>(std::max(1, cfg_.mapping.map_every)))
    recent_.pop_front();

  const Keyframe& last_kf = keyframes_.back();
  Pose rel = pose * last_kf.pose.inverse();
  bool is_keyframe =
      rotation_angle(rel.R, Eigen::Matrix3d::Identity()) > cfg_.keyframe.delta_r ||
      (pose.center() - last_kf.pose.center()).norm() > cfg_.keyframe.delta_t;

  if (is_keyframe) {
    keyframes_.push_back({id, frame, pose});
    run_window(/*keyframe_window=*/true, frame, pose);
  } else if (cfg_.mapping.map_every > 0 && id % cfg_.mapping.map_every == 0) {
    run_window(/*keyframe_window=*/false, frame, pose);
  }
}

void SlamSystem::finalize() {
  if (keyframes_.empty()) return;
  int iters =
      cfg_.mapping.final_refine_multiplier * cfg_.mapping.iterations_per_window;
  if (iters <= 0) return;
  std::vector<const Frame*> frames;
  std::vector<Pose> poses;
  std::vector<int> ids;
  for (const Keyframe& kf : keyframes_) {
    frames.push_back(&kf.frame);
    poses.push_back(kf.pose);
    ids.push_back(kf.id);
  }
  std::vector<LossTraceRow> rows =
      optimize_window(map_, opt_, frames, poses, ids, K_, cfg_.mapping,
                      cfg_.render, iters);
  mapping_trace_.insert(mapping_trace_.end(), rows.begin(), rows.end());
}

PointCloud SlamSystem::export_pointcloud(int stride) const {
  PointCloud pc;
  if (stride < 1) stride = 1;
  std::unordered_set<uint64_t> seen;
  RenderConfig rcfg = cfg_.render;
  rcfg.depth_mode = DepthMode::Adaptive;

  for (const Keyframe& kf : keyframes_) {
    RenderOutput rendered = render(map_, kf.pose, K_, rcfg);
    Pose inv = kf.pose.inverse();
    for (int row = 0; row < K_.height; row += stride) {
      for (int col = 0; col < K_.width; col += stride) {
        if (!rendered.valid.at(col, row)) continue;
        double d = rendered.depth.at(col, row);
        if (d <= 0.0) continue;
        Eigen::Vector3d p_world = inv * (d * K_.ray(col, row));
        if (!seen.insert(voxel_key(p_world)).second) continue;
        Eigen::Vector3d n_cam = rendered.normal.at(col, row);
        Eigen::Vector3d n_world = Eigen::Vector3d::Zero();
        if (n_cam.squaredNorm() > 1e-12)
          n_world = (inv.R * n_cam).normalized();
        pc.points.push_back(p_world);
        pc.normals.push_back(n_world);
        pc.colors.push_back(rendered.color.at(col, row)
                                .cwiseMax(0.0)
                                .cwiseMin(1.0));
      }
    }
  }
  return pc;
}

}  // namespace sslam
