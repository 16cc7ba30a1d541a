#include "sslam/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sslam/parallel.hpp"

namespace sslam {

namespace {
constexpr double kAlphaMax = 0.9999;  // blend clamp, keeps 1-a away from 0
constexpr double kParallelEps = 1e-9;
}

CameraSurfel to_camera(const Surfel& s, const Pose& pose, int id) {
  CameraSurfel c;
  Eigen::Matrix3d Rs = s.rotation();
  c.center = pose * s.p;
  c.tu = pose.R * Rs.col(0);
  c.tv = pose.R * Rs.col(1);
  c.tw = pose.R * Rs.col(2);
  c.su = s.su();
  c.sv = s.sv();
  c.alpha = s.alpha();
  c.color = s.color;
  c.id = id;
  return c;
}

std::optional<Intersection> intersect(const CameraSurfel& s,
                                      const Eigen::Vector3d& ray,
                                      const RenderConfig& cfg) {
  double nd = s.tw.dot(ray);
  if (std::abs(nd) < kParallelEps) return std::nullopt;
  double z = s.tw.dot(s.center) / nd;
  if (z <= cfg.near_z) return std::nullopt;
  Eigen::Vector3d delta = z * ray - s.center;
  double u = delta.dot(s.tu) / s.su;
  double v = delta.dot(s.tv) / s.sv;
  double r2 = u * u + v * v;
  if (r2 > cfg.gauss_cutoff) return std::nullopt;
  Intersection hit;
  hit.surfel = s.id;
  hit.u = u;
  hit.v = v;
  hit.z = z;
  hit.gauss = std::exp(-0.5 * r2);
  return hit;
}

std::optional<Intersection> intersect(const Surfel& s,
                                      const Eigen::Vector3d& ray,
                                      const Pose& pose,
                                      const RenderConfig& cfg) {
  return intersect(to_camera(s, pose, 0), ray, cfg);
}

double distortion_term(std::span<const double> weights,
                       std::span<const double> depths) {
  size_t n = weights.size();
  if (n < 2) return 0.0;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return depths[a] < depths[b]; });
  // Ascending z: sum_{i,j} w_i w_j |z_i - z_j| = 2 * sum_i w_i (z_i*A - B)
  // with A, B the running sums of w and w*z over earlier hits.
  double acc_w = 0.0, acc_wz = 0.0, total = 0.0;
  for (int idx : order) {
    double w = weights[idx], z = depths[idx];
    total += 2.0 * w * (z * acc_w - acc_wz);
    acc_w += w;
    acc_wz += w * z;
  }
  return total;
}

RenderContext build_render_context(const SurfelMap& map, const Pose& pose,
                                   const Intrinsics& K,
                                   const RenderConfig& cfg) {
  RenderContext ctx;
  int tile = cfg.tile_size;
  ctx.tiles_x = (K.width + tile - 1) / tile;
  ctx.tiles_y = (K.height + tile - 1) / tile;
  ctx.tile_lists.resize(static_cast<size_t>(ctx.tiles_x) * ctx.tiles_y);

  size_t n = map.size();
  ctx.cam_surfels.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    ctx.cam_surfels.push_back(to_camera(map[i], pose, static_cast<int>(i)));
  }
  std::sort(ctx.cam_surfels.begin(), ctx.cam_surfels.end(),
            [](const CameraSurfel& a, const CameraSurfel& b) {
              if (a.center.z() != b.center.z()) return a.center.z() < b.center.z();
              return a.id < b.id;
            });

  double cut = std::sqrt(cfg.gauss_cutoff);
  for (size_t si = 0; si < ctx.cam_surfels.size(); ++si) {
    const CameraSurfel& s = ctx.cam_surfels[si];
    double radius = cut * std::max(s.su, s.sv);
    double zc = s.center.z();
    if (zc + radius <= cfg.near_z) continue;

    int c0, c1, r0, r1;
    double znear = zc - radius;
    if (znear <= cfg.near_z) {
      // Disk straddles the near plane; no tight screen bound, take the
      // whole image and let the per-pixel test sort it out.
      c0 = 0; r0 = 0; c1 = K.width - 1; r1 = K.height - 1;
    } else {
      Eigen::Vector2d px = project(s.center, K);
      double rx = K.fx * radius / znear;
      double ry = K.fy * radius / znear;
      c0 = static_cast<int>(std::floor(px.x() - rx));
      c1 = static_cast<int>(std::ceil(px.x() + rx));
      r0 = static_cast<int>(std::floor(px.y() - ry));
      r1 = static_cast<int>(std::ceil(px.y() + ry));
      c0 = std::max(c0, 0); r0 = std::max(r0, 0);
      c1 = std::min(c1, K.width - 1); r1 = std::min(r1, K.height - 1);
      if (c0 > c1 || r0 > r1) continue;
    }
    for (int ty = r0 / tile; ty <= r1 / tile; ++ty) {
      for (int tx = c0 / tile; tx <= c1 / tile; ++tx) {
        ctx.tile_lists[static_cast<size_t>(ty) * ctx.tiles_x + tx].push_back(
            static_cast<int>(si));
      }
    }
  }
  return ctx;
}

RenderOutput render(const SurfelMap& map, const Pose& pose,
                    const Intrinsics& K, const RenderConfig& cfg) {
  RenderOutput out;
  out.width = K.width;
  out.height = K.height;
  out.color = ColorImage(K.width, K.height, Eigen::Vector3d::Zero());
  out.depth = GrayImage(K.width, K.height, 0.0);
  out.normal = NormalImage(K.width, K.height, Eigen::Vector3d::Zero());
  out.distortion = GrayImage(K.width, K.height, 0.0);
  out.transmittance = GrayImage(K.width, K.height, 1.0);
  out.alpha_sum = GrayImage(K.width, K.height, 0.0);
  out.dominant_id = Image<int>(K.width, K.height, -1);
  out.dominant_depth = GrayImage(K.width, K.height, 0.0);
  out.dominant_normal = NormalImage(K.width, K.height, Eigen::Vector3d::Zero());
  out.valid = MaskImage(K.width, K.height, 0);
  out.substituted = MaskImage(K.width, K.height, 0);

  RenderContext ctx = build_render_context(map, pose, K, cfg);
  int tile = cfg.tile_size;
  int n_tiles = ctx.tiles_x * ctx.tiles_y;
  size_t map_size = std::max<size_t>(map.size(), 1);

  struct Scratch {
    std::vector<double> w, z;
  };
  std::vector<Scratch> scratch(resolve_threads(cfg.threads));

  parallel_for(n_tiles, cfg.threads, [&](int t, int worker) {
    const std::vector<int>& list = ctx.tile_lists[static_cast<size_t>(t)];
    int tx = t % ctx.tiles_x, ty = t / ctx.tiles_x;
    int c_end = std::min((tx + 1) * tile, K.width);
    int r_end = std::min((ty + 1) * tile, K.height);
    Scratch& sc = scratch[worker];

    for (int row = ty * tile; row < r_end; ++row) {
      for (int col = tx * tile; col < c_end; ++col) {
        Eigen::Vector3d ray = K.ray(col, row);
        sc.w.clear();
        sc.z.clear();
        double T = 1.0;
        Eigen::Vector3d color = Eigen::Vector3d::Zero();
        Eigen::Vector3d normal = Eigen::Vector3d::Zero();
        double w_sum = 0.0, wz_sum = 0.0;
        double dom_w = 0.0, dom_z = 0.0;
        Eigen::Vector3d dom_n = Eigen::Vector3d::Zero();
        int dom_id = -1;

        for (int si : list) {
          if (cfg.t_min > 0 && T < cfg.t_min) break;
          const CameraSurfel& s = ctx.cam_surfels[si];
          auto hit = intersect(s, ray, cfg);
          if (!hit) continue;
          double a = std::min(s.alpha * hit->gauss, kAlphaMax);
          if (a < cfg.alpha_min || a <= 0.0) continue;
          double z = hit->z;
          if (cfg.depth_offset) {
            uint64_t key =
                (static_cast<uint64_t>(row) * K.width + col) * map_size + s.id;
            if (cfg.depth_offset->mode == DepthOffsetHook::Mode::Capture) {
              cfg.depth_offset->offsets[key] = z - s.center.z();
            } else {
              auto it = cfg.depth_offset->offsets.find(key);
              if (it != cfg.depth_offset->offsets.end()) {
                z = s.center.z() + it->second;
              }
            }
          }
          double w = a * T;
          T *= 1.0 - a;
          color += w * s.color;
          normal += w * s.tw;
          w_sum += w;
          wz_sum += w * z;
          if (w > dom_w) {
            dom_w = w;
            dom_z = z;
            dom_n = s.tw;
            dom_id = s.id;
          }
          sc.w.push_back(w);
          sc.z.push_back(z);
        }

        out.transmittance.at(col, row) = T;
        if (sc.w.empty()) continue;

        out.color.at(col, row) = color;
        out.normal.at(col, row) = normal;
        out.alpha_sum.at(col, row) = w_sum;
        out.dominant_id.at(col, row) = dom_id;
        out.dominant_depth.at(col, row) = dom_z;
        out.dominant_normal.at(col, row) = dom_n;
        out.valid.at(col, row) = w_sum > cfg.valid_alpha ? 1 : 0;

        double dd = distortion_term(sc.w, sc.z);
        out.distortion.at(col, row) = dd;

        double depth = 0.0;
        double mean_depth = wz_sum / w_sum;
        switch (cfg.depth_mode) {
          case DepthMode::Mean:
            depth = mean_depth;
            break;
          case DepthMode::Median: {
            // First hit, in blend order, where the running weight crosses
            // one half; thin pixels that never cross keep the last hit.
            double acc = 0.0;
            depth = sc.z.back();
            for (size_t i = 0; i < sc.w.size(); ++i) {
              acc += sc.w[i];
              if (acc > 0.5) {
                depth = sc.z[i];
                break;
              }
            }
            break;
          }
          case DepthMode::Adaptive:
            if (dd > cfg.tau && mean_depth > dom_z) {
              depth = dom_z;
              out.normal.at(col, row) = dom_n;
              out.substituted.at(col, row) = 1;
            } else {
              depth = mean_depth;
            }
            break;
        }
        out.depth.at(col, row) = depth;
      }
    }
  });

  return out;
}

}  // namespace sslam
