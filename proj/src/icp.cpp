#include "sslam/icp.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sslam {

namespace {

struct Level {
  GrayImage src_depth, tgt_depth;
  NormalImage src_normal, tgt_normal;
  Intrinsics K;
};

template <typename T>
Image<T> subsample(const Image<T>& in, int stride, int w, int h) {
  Image<T> out(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) out.at(c, r) = in.at(c * stride, r * stride);
  return out;
}

Level make_level(const Frame& frame, const GrayImage& model_depth,
                 const NormalImage& model_normal, const Intrinsics& K,
                 int stride) {
  Level lv;
  lv.K.width = K.width / stride;
  lv.K.height = K.height / stride;
  lv.K.fx = K.fx / stride;
  lv.K.fy = K.fy / stride;
  lv.K.cx = K.cx / stride;
  lv.K.cy = K.cy / stride;
  lv.src_depth = subsample(frame.depth, stride, lv.K.width, lv.K.height);
  lv.src_normal = subsample(frame.normal, stride, lv.K.width, lv.K.height);
  lv.tgt_depth = subsample(model_depth, stride, lv.K.width, lv.K.height);
  lv.tgt_normal = subsample(model_normal, stride, lv.K.width, lv.K.height);
  return lv;
}

}  // namespace

Pose icp_track(const Frame& frame, const GrayImage& model_depth,
               const NormalImage& model_normal, const Pose& init_pose,
               const Intrinsics& K, const IcpConfig& cfg) {
  if (model_depth.width() != K.width || model_depth.height() != K.height ||
      frame.depth.width() != K.width || frame.depth.height() != K.height)
    throw std::invalid_argument("icp_track: image/intrinsics size mismatch");

  const double cos_max = std::cos(cfg.max_normal_angle);
  // Relative transform taking frame-camera points into the model camera.
  Pose T_rel;

  for (int level = 0; level < cfg.levels; ++level) {
    int stride = 1 << (cfg.levels - 1 - level);
    Level lv = make_level(frame, model_depth, model_normal, K, stride);

    for (int iter = 0; iter < cfg.iterations_per_level; ++iter) {
      Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
      Vector6d b = Vector6d::Zero();
      int pairs = 0;

      for (int r = 0; r < lv.K.height; ++r) {
        for (int c = 0; c < lv.K.width; ++c) {
          double d_s = lv.src_depth.at(c, r);
          if (d_s <= 0.0) continue;
          Eigen::Vector3d n_s = lv.src_normal.at(c, r);
          if (!normal_valid(n_s)) continue;

          Eigen::Vector3d p = T_rel * (d_s * lv.K.ray(c, r));
          if (p.z() <= 1e-6) continue;
          Eigen::Vector2d px = project(p, lv.K);
          int tc = static_cast<int>(std::lround(px.x()));
          int tr = static_cast<int>(std::lround(px.y()));
          if (tc < 0 || tr < 0 || tc >= lv.K.width || tr >= lv.K.height)
            continue;

          double d_t = lv.tgt_depth.at(tc, tr);
          if (d_t <= 0.0) continue;
          Eigen::Vector3d n_q = lv.tgt_normal.at(tc, tr);
          double nq_len = n_q.norm();
          if (nq_len < 0.5) continue;  // empty or badly mixed model normal
          n_q /= nq_len;

          Eigen::Vector3d q = d_t * lv.K.ray(tc, tr);
          if ((p - q).norm() > cfg.max_pair_distance) continue;
          Eigen::Vector3d n_s_rot = (T_rel.R * n_s).normalized();
          if (n_s_rot.dot(n_q) < cos_max) continue;

          double res = n_q.dot(p - q);
          Vector6d J;
          J.head<3>() = n_q;
          J.tail<3>() = p.cross(n_q);
          A += J * J.transpose();
          b += J * res;
          ++pairs;
        }
      }

      if (level == 0 && iter == 0 && pairs < cfg.min_pairs)
        throw std::runtime_error(
            "icp_track: only " + std::to_string(pairs) +
            " correspondences at the coarsest level (need " +
            std::to_string(cfg.min_pairs) + ")");
      if (pairs == 0) break;

      // Least-norm solve; near-zero singular values (unobservable
      // directions, e.g. sliding along a single plane) are truncated.
      Eigen::JacobiSVD<Eigen::Matrix<double, 6, 6>> svd(
          A, Eigen::ComputeFullU | Eigen::ComputeFullV);
      svd.setThreshold(1e-10);
      Vector6d xi = svd.solve(-b);
      T_rel = exp_se3(xi) * T_rel;
    }
  }
  // p_model = T_rel * p_frame and p_model = T_init * p_world give
  // T_frame = T_rel^-1 * T_init.
  return T_rel.inverse() * init_pose;
}

}  // namespace sslam
