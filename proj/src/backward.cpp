#include "sslam/backward.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sslam/parallel.hpp"

namespace sslam {

namespace {

constexpr double kAlphaMax = 0.9999;  // must match the forward blend clamp

struct HitRec {
  int ci;  // index into RenderContext::cam_surfels
  double u, v, z, gauss, a, w, t_before;
};

// Camera-frame adjoints of a single pixel/surfel interaction.
struct HitGrad {
  Eigen::Vector3d g_center = Eigen::Vector3d::Zero();
  Eigen::Vector3d g_tu = Eigen::Vector3d::Zero();
  Eigen::Vector3d g_tv = Eigen::Vector3d::Zero();
  Eigen::Vector3d g_tw = Eigen::Vector3d::Zero();
  Eigen::Vector3d g_color = Eigen::Vector3d::Zero();
  double g_su = 0.0;     // w.r.t. the linear scales
  double g_sv = 0.0;
  double g_alpha = 0.0;  // w.r.t. the opacity after the sigmoid
};

struct Scratch {
  std::vector<HitRec> hits;
  std::vector<double> dw, dz, dat;
};

void check_sizes(const RenderOutput& render, const LossGrads& grads,
                 const Intrinsics& K) {
  if (render.width != K.width || render.height != K.height)
    throw std::invalid_argument("backward: render size does not match intrinsics");
  if (grads.d_color.width() != K.width || grads.d_color.height() != K.height ||
      grads.d_depth.width() != K.width || grads.d_depth.height() != K.height ||
      grads.d_normal.width() != K.width || grads.d_normal.height() != K.height)
    throw std::invalid_argument("backward: loss gradient size mismatch");
}

// Replays the forward traversal pixel by pixel and hands per-hit camera-frame
// gradients to `sink(worker, cam_surfel, hit_grad)`. The adaptive depth
// substitution recorded in `render` is treated as a fixed selection, as are
// the dominant-surfel and median picks. Depth-offset hooks are a probing
// device for the forward pass only and are ignored here.
template <typename Sink>
void replay(const SurfelMap& map, const Pose& pose, const Intrinsics& K,
            const RenderOutput& render, const LossGrads& grads,
            const RenderConfig& cfg, bool radial_enabled, Sink&& sink) {
  check_sizes(render, grads, K);
  RenderContext ctx = build_render_context(map, pose, K, cfg);
  int tile = cfg.tile_size;
  int n_tiles = ctx.tiles_x * ctx.tiles_y;
  std::vector<Scratch> scratch(resolve_threads(cfg.threads));

  parallel_for(n_tiles, cfg.threads, [&](int t, int worker) {
    const std::vector<int>& list = ctx.tile_lists[static_cast<size_t>(t)];
    if (list.empty()) return;
    int tx = t % ctx.tiles_x, ty = t / ctx.tiles_x;
    int c_end = std::min((tx + 1) * tile, K.width);
    int r_end = std::min((ty + 1) * tile, K.height);
    Scratch& sc = scratch[worker];

    for (int row = ty * tile; row < r_end; ++row) {
      for (int col = tx * tile; col < c_end; ++col) {
        const Eigen::Vector3d gC = grads.d_color.at(col, row);
        const double gD = grads.d_depth.at(col, row);
        const Eigen::Vector3d gN = grads.d_normal.at(col, row);
        if (gD == 0.0 && gC.isZero(0.0) && gN.isZero(0.0)) continue;

        Eigen::Vector3d ray = K.ray(col, row);
        sc.hits.clear();
        double T = 1.0;
        for (int si : list) {
          if (cfg.t_min > 0 && T < cfg.t_min) break;
          const CameraSurfel& s = ctx.cam_surfels[si];
          auto hit = intersect(s, ray, cfg);
          if (!hit) continue;
          double a = std::min(s.alpha * hit->gauss, kAlphaMax);
          if (a < cfg.alpha_min || a <= 0.0) continue;
          HitRec rec;
          rec.ci = si;
          rec.u = hit->u;
          rec.v = hit->v;
          rec.z = hit->z;
          rec.gauss = hit->gauss;
          rec.a = a;
          rec.w = a * T;
          rec.t_before = T;
          T *= 1.0 - a;
          sc.hits.push_back(rec);
        }
        size_t n = sc.hits.size();
        if (n == 0) continue;

        double w_sum = 0.0, wz_sum = 0.0;
        double dom_w = 0.0;
        size_t dom_idx = 0;
        for (size_t i = 0; i < n; ++i) {
          const HitRec& h = sc.hits[i];
          w_sum += h.w;
          wz_sum += h.w * h.z;
          if (h.w > dom_w) {
            dom_w = h.w;
            dom_idx = i;
          }
        }
        double mean_depth = wz_sum / w_sum;

        bool substituted = cfg.depth_mode == DepthMode::Adaptive &&
                           render.substituted.at(col, row) != 0;
        bool blend_depth = cfg.depth_mode == DepthMode::Mean ||
                           (cfg.depth_mode == DepthMode::Adaptive && !substituted);
        bool blend_normal = !substituted;
        size_t point_idx = dom_idx;
        if (cfg.depth_mode == DepthMode::Median) {
          double acc = 0.0;
          point_idx = n - 1;
          for (size_t i = 0; i < n; ++i) {
            acc += sc.hits[i].w;
            if (acc > 0.5) {
              point_idx = i;
              break;
            }
          }
        }

        sc.dw.assign(n, 0.0);
        sc.dz.assign(n, 0.0);
        sc.dat.assign(n, 0.0);
        for (size_t i = 0; i < n; ++i) {
          const HitRec& h = sc.hits[i];
          const CameraSurfel& s = ctx.cam_surfels[h.ci];
          double dw = gC.dot(s.color);
          if (blend_normal) dw += gN.dot(s.tw);
          if (blend_depth) {
            dw += gD * (h.z - mean_depth) / w_sum;
            sc.dz[i] = gD * h.w / w_sum;
          }
          sc.dw[i] = dw;
        }
        if (!blend_depth) sc.dz[point_idx] += gD;

        // Occlusion chain: each hit's effective opacity scales every later
        // weight by (1 - a_i), so the adjoint is the direct term minus the
        // discounted suffix of downstream weight adjoints.
        double suffix = 0.0;
        for (size_t i = n; i-- > 0;) {
          const HitRec& h = sc.hits[i];
          sc.dat[i] = sc.dw[i] * h.t_before - suffix / (1.0 - h.a);
          suffix += sc.dw[i] * h.w;
        }

        for (size_t i = 0; i < n; ++i) {
          const HitRec& h = sc.hits[i];
          const CameraSurfel& s = ctx.cam_surfels[h.ci];
          double gG = 0.0, galpha = 0.0;
          if (h.a < kAlphaMax) {  // the clamp flattens both partials
            gG = sc.dat[i] * s.alpha;
            galpha = sc.dat[i] * h.gauss;
          }
          double gu = -h.u * h.gauss * gG;
          double gv = -h.v * h.gauss * gG;

          double nd = s.tw.dot(ray);
          Eigen::Vector3d delta = h.z * ray - s.center;
          Eigen::Vector3d gdelta = (gu / s.su) * s.tu + (gv / s.sv) * s.tv;
          double gz = gdelta.dot(ray);
          if (radial_enabled) gz += sc.dz[i];

          HitGrad hg;
          hg.g_center = (gz / nd) * s.tw - gdelta;
          if (!radial_enabled) {
            // Depth reads the surfel center's camera z plus a frozen
            // center-to-hit offset, so the output adjoint lands on the
            // center's z alone.
            hg.g_center.z() += sc.dz[i];
          }
          hg.g_tw = (gz / nd) * (s.center - h.z * ray);
          if (blend_normal) {
            hg.g_tw += h.w * gN;
          } else if (i == dom_idx) {
            hg.g_tw += gN;
          }
          hg.g_tu = (gu / s.su) * delta;
          hg.g_tv = (gv / s.sv) * delta;
          hg.g_su = -gu * h.u / s.su;
          hg.g_sv = -gv * h.v / s.sv;
          hg.g_alpha = galpha;
          hg.g_color = h.w * gC;
          sink(worker, s, hg);
        }
      }
    }
  });
}

}  // namespace

void SurfelGrads::resize_zero(size_t n) {
  p.assign(n, Eigen::Vector3d::Zero());
  q.assign(n, Eigen::Vector4d::Zero());
  log_s.assign(n, Eigen::Vector2d::Zero());
  logit_alpha.assign(n, 0.0);
  color.assign(n, Eigen::Vector3d::Zero());
}

void SurfelGrads::add(const SurfelGrads& other) {
  for (size_t i = 0; i < p.size(); ++i) {
    p[i] += other.p[i];
    q[i] += other.q[i];
    log_s[i] += other.log_s[i];
    logit_alpha[i] += other.logit_alpha[i];
    color[i] += other.color[i];
  }
}

Eigen::Vector4d quaternion_grad(const Eigen::Quaterniond& q_raw,
                                const Eigen::Vector3d& g_col0,
                                const Eigen::Vector3d& g_col1,
                                const Eigen::Vector3d& g_col2) {
  Eigen::Quaterniond qn = q_raw.normalized();
  const double w = qn.w(), x = qn.x(), y = qn.y(), z = qn.z();
  using V3 = Eigen::Vector3d;
  Eigen::Vector4d g;
  g(0) = g_col0.dot(V3(0, 2 * z, -2 * y)) + g_col1.dot(V3(-2 * z, 0, 2 * x)) +
         g_col2.dot(V3(2 * y, -2 * x, 0));
  g(1) = g_col0.dot(V3(0, 2 * y, 2 * z)) + g_col1.dot(V3(2 * y, -4 * x, 2 * w)) +
         g_col2.dot(V3(2 * z, -2 * w, -4 * x));
  g(2) = g_col0.dot(V3(-4 * y, 2 * x, -2 * w)) + g_col1.dot(V3(2 * x, 0, 2 * z)) +
         g_col2.dot(V3(2 * w, 2 * z, -4 * y));
  g(3) = g_col0.dot(V3(-4 * z, 2 * w, 2 * x)) +
         g_col1.dot(V3(-2 * w, -4 * z, 2 * y)) + g_col2.dot(V3(2 * x, 2 * y, 0));
  Eigen::Vector4d q_unit(w, x, y, z);
  return (g - q_unit * q_unit.dot(g)) / q_raw.coeffs().norm();
}

SurfelGrads backward_surfels(const SurfelMap& map, const Pose& pose,
                             const Intrinsics& K, const RenderOutput& render,
                             const LossGrads& grads, const RenderConfig& cfg) {
  int workers = resolve_threads(cfg.threads);
  std::vector<SurfelGrads> acc(workers);
  for (SurfelGrads& g : acc) g.resize_zero(map.size());
  Eigen::Matrix3d Rt = pose.R.transpose();

  replay(map, pose, K, render, grads, cfg, /*radial_enabled=*/true,
         [&](int worker, const CameraSurfel& s, const HitGrad& hg) {
           SurfelGrads& g = acc[worker];
           int id = s.id;
           g.p[id] += Rt * hg.g_center;
           g.q[id] += quaternion_grad(map[id].q, Rt * hg.g_tu, Rt * hg.g_tv,
                                      Rt * hg.g_tw);
           g.log_s[id] +=
               Eigen::Vector2d(hg.g_su * s.su, hg.g_sv * s.sv);
           g.logit_alpha[id] += hg.g_alpha * s.alpha * (1.0 - s.alpha);
           g.color[id] += hg.g_color;
         });

  SurfelGrads out = std::move(acc[0]);
  for (int w = 1; w < workers; ++w) out.add(acc[w]);
  return out;
}

PoseGrad backward_pose(const SurfelMap& map, const Pose& pose,
                       const Intrinsics& K, const RenderOutput& render,
                       const LossGrads& grads, const RenderConfig& cfg,
                       bool radial_enabled) {
  int workers = resolve_threads(cfg.threads);
  std::vector<PoseGrad> acc(workers, PoseGrad::Zero());

  replay(map, pose, K, render, grads, cfg, radial_enabled,
         [&](int worker, const CameraSurfel& s, const HitGrad& hg) {
           PoseGrad& g = acc[worker];
           g.head<3>() += hg.g_center;
           g.tail<3>() += s.center.cross(hg.g_center) + s.tu.cross(hg.g_tu) +
                          s.tv.cross(hg.g_tv) + s.tw.cross(hg.g_tw);
         });

  PoseGrad out = acc[0];
  for (int w = 1; w < workers; ++w) out += acc[w];
  return out;
}

}  // namespace sslam
