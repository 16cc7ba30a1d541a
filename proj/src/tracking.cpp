#include "sslam/tracking.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "sslam/adam.hpp"
#include "sslam/rasterizer.hpp"

namespace sslam {

namespace {
double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}

TrackingLoss tracking_loss(const RenderOutput& render, const Frame& frame,
                           const TrackingConfig& cfg) {
  int w = render.width, h = render.height;
  if (frame.color.width() != w || frame.color.height() != h)
    throw std::invalid_argument("tracking_loss: frame/render resolution mismatch");

  TrackingLoss out;
  out.grads.d_color = ColorImage(w, h, Eigen::Vector3d::Zero());
  out.grads.d_depth = GrayImage(w, h, 0.0);
  out.grads.d_normal = NormalImage(w, h, Eigen::Vector3d::Zero());

  long n_depth = 0;
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) {
      if (render.valid.at(col, row)) ++out.valid_pixels;
      if (frame.depth.at(col, row) > 0.0 && render.valid.at(col, row))
        ++n_depth;
    }

  const double color_scale = cfg.lambda_c / (3.0 * w * h);
  const double depth_scale = n_depth > 0 ? cfg.lambda_d / n_depth : 0.0;

  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      Eigen::Vector3d dc =
          render.color.at(col, row) - frame.color.at(col, row);
      out.color += color_scale * dc.cwiseAbs().sum();
      out.grads.d_color.at(col, row) =
          color_scale * dc.unaryExpr([](double x) { return sign(x); });

      double d_in = frame.depth.at(col, row);
      if (d_in <= 0.0 || !render.valid.at(col, row)) continue;
      double dd = render.depth.at(col, row) - d_in;
      out.depth += depth_scale * std::abs(dd);
      out.grads.d_depth.at(col, row) = depth_scale * sign(dd);
    }
  }
  out.total = out.color + out.depth;
  return out;
}

TrackResult track_frame(const SurfelMap& map, const Frame& frame,
                        const Pose& init_pose, const Intrinsics& K,
                        const TrackingConfig& cfg, const RenderConfig& rcfg) {
  if (map.empty())
    throw std::invalid_argument("track_frame: empty map");

  const long min_valid = static_cast<long>(
      cfg.min_valid_fraction * static_cast<double>(K.width) * K.height);

  Pose T = init_pose;
  Adam trans_adam, rot_adam;
  TrackResult result;
  result.pose = init_pose;
  result.loss = std::numeric_limits<double>::infinity();
  result.trace.reserve(static_cast<size_t>(cfg.iterations) + 1);

  for (int it = 0; it <= cfg.iterations; ++it) {
    RenderOutput rendered = render(map, T, K, rcfg);
    TrackingLoss loss = tracking_loss(rendered, frame, cfg);
    if (loss.valid_pixels < min_valid)
      throw TrackingError(
          "track_frame: rendered coverage " + std::to_string(loss.valid_pixels) +
          " px below minimum " + std::to_string(min_valid) + " at iteration " +
          std::to_string(it));

    if (loss.total < result.loss) {
      result.loss = loss.total;
      result.pose = T;
    }
    result.trace.push_back(
        {it, loss.total, loss.color, loss.depth, loss.valid_pixels});
    if (it == cfg.iterations) break;

    PoseGrad g = backward_pose(map, T, K, rendered, loss.grads, rcfg,
                               cfg.radial_enabled);
    Twist xi = Twist::Zero();
    trans_adam.step(xi.data(), g.data(), 3, cfg.lr_trans);
    rot_adam.step(xi.data() + 3, g.data() + 3, 3, cfg.lr_rot);
    T = exp_se3(xi) * T;
  }
  return result;
}

void append_track_trace(const std::string& path, int frame_id,
                        const std::vector<TrackTraceRow>& rows) {
  bool fresh = !std::filesystem::exists(path);
  std::ofstream f(path, std::ios::app);
  if (!f) throw std::runtime_error("cannot open track trace: " + path);
  if (fresh) f << "frame_id,iteration,total,color,depth,valid_pixels\n";
  for (const TrackTraceRow& r : rows) {
    f << frame_id << ',' << r.iteration << ',' << r.total << ',' << r.color
      << ',' << r.depth << ',' << r.valid_pixels << '\n';
  }
}

}  // namespace sslam
