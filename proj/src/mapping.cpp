#include "sslam/mapping.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sslam/rasterizer.hpp"

namespace sslam {

namespace {

constexpr double kNormalLenEps = 1e-12;  // squared-length floor for renders

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Residuals of each valid pixel feed the pruning statistics of the surfel
// that dominates the pixel's blend.
void accumulate_stats(SurfelMap& map, const RenderOutput& render,
                      const Frame& frame) {
  std::vector<SurfelStats>& stats = map.stats();
  for (int row = 0; row < render.height; ++row) {
    for (int col = 0; col < render.width; ++col) {
      if (!render.valid.at(col, row)) continue;
      int dom = render.dominant_id.at(col, row);
      if (dom < 0 || static_cast<size_t>(dom) >= stats.size()) continue;
      SurfelStats& st = stats[static_cast<size_t>(dom)];
      st.count += 1;
      Eigen::Vector3d dc =
          render.color.at(col, row) - frame.color.at(col, row);
      st.color_err += dc.cwiseAbs().mean();
      double d_in = frame.depth.at(col, row);
      if (d_in > 0.0)
        st.depth_err += std::abs(render.depth.at(col, row) - d_in);
    }
  }
}

}  // namespace

MappingLoss mapping_loss(const RenderOutput& render, const Frame& frame,
                         const MappingConfig& cfg) {
  int w = render.width, h = render.height;
  if (frame.color.width() != w || frame.color.height() != h)
    throw std::invalid_argument("mapping_loss: frame/render resolution mismatch");

  MappingLoss out;
  out.grads.d_color = ColorImage(w, h, Eigen::Vector3d::Zero());
  out.grads.d_depth = GrayImage(w, h, 0.0);
  out.grads.d_normal = NormalImage(w, h, Eigen::Vector3d::Zero());

  // Count the masked pixels first: the per-pixel adjoints carry the mean
  // normalization.
  long n_depth = 0, n_normal = 0;
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      bool both = frame.depth.at(col, row) > 0.0 && render.valid.at(col, row);
      if (!both) continue;
      ++n_depth;
      if (normal_valid(frame.normal.at(col, row)) &&
          render.normal.at(col, row).squaredNorm() > kNormalLenEps)
        ++n_normal;
    }
  }

  const double color_scale = 1.0 / (3.0 * w * h);
  const double depth_scale = n_depth > 0 ? cfg.gamma_d / n_depth : 0.0;
  const double normal_scale = n_normal > 0 ? cfg.gamma_n / n_normal : 0.0;

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

      const Eigen::Vector3d& n_in = frame.normal.at(col, row);
      const Eigen::Vector3d& n_r = render.normal.at(col, row);
      double len2 = n_r.squaredNorm();
      if (!normal_valid(n_in) || len2 <= kNormalLenEps) continue;
      double len = std::sqrt(len2);
      Eigen::Vector3d n_hat = n_r / len;
      out.normal += normal_scale * (1.0 - n_hat.dot(n_in));
      // d(1 - n_hat.n_in)/dN through the normalization.
      out.grads.d_normal.at(col, row) =
          -normal_scale / len * (n_in - n_hat * n_hat.dot(n_in));
    }
  }
  out.total = out.color + out.depth + out.normal;
  return out;
}

void MapOptimizer::step(SurfelMap& map, const SurfelGrads& grads,
                        const MappingConfig& cfg, double extent) {
  size_t n = map.size();
  if (n == 0) return;
  if (grads.p.size() != n)
    throw std::invalid_argument("MapOptimizer::step: gradient size mismatch");
  std::vector<Surfel>& s = map.surfels();

  auto run_group = [&](size_t stride, Adam& adam, double lr, auto&& gather,
                       auto&& scatter) {
    params_.resize(n * stride);
    grad_buf_.resize(n * stride);
    for (size_t i = 0; i < n; ++i) gather(i, &params_[i * stride], &grad_buf_[i * stride]);
    adam.step(params_.data(), grad_buf_.data(), n * stride, lr);
    for (size_t i = 0; i < n; ++i) scatter(i, &params_[i * stride]);
  };

  run_group(
      3, p_, cfg.lr_p * extent,
      [&](size_t i, double* p, double* g) {
        Eigen::Vector3d::Map(p) = s[i].p;
        Eigen::Vector3d::Map(g) = grads.p[i];
      },
      [&](size_t i, const double* p) {
        s[i].p = Eigen::Vector3d::Map(p);
      });
  run_group(
      4, q_, cfg.lr_q,
      [&](size_t i, double* p, double* g) {
        p[0] = s[i].q.w(); p[1] = s[i].q.x(); p[2] = s[i].q.y(); p[3] = s[i].q.z();
        Eigen::Vector4d::Map(g) = grads.q[i];
      },
      [&](size_t i, const double* p) {
        s[i].q = Eigen::Quaterniond(p[0], p[1], p[2], p[3]).normalized();
      });
  run_group(
      2, log_s_, cfg.lr_log_s,
      [&](size_t i, double* p, double* g) {
        Eigen::Vector2d::Map(p) = s[i].log_s;
        Eigen::Vector2d::Map(g) = grads.log_s[i];
      },
      [&](size_t i, const double* p) {
        s[i].log_s = Eigen::Vector2d::Map(p);
      });
  run_group(
      1, logit_alpha_, cfg.lr_logit_alpha,
      [&](size_t i, double* p, double* g) {
        p[0] = s[i].logit_alpha;
        g[0] = grads.logit_alpha[i];
      },
      [&](size_t i, const double* p) { s[i].logit_alpha = p[0]; });
  run_group(
      3, color_, cfg.lr_color,
      [&](size_t i, double* p, double* g) {
        Eigen::Vector3d::Map(p) = s[i].color;
        Eigen::Vector3d::Map(g) = grads.color[i];
      },
      [&](size_t i, const double* p) {
        s[i].color = Eigen::Vector3d::Map(p);
      });
}

void MapOptimizer::on_densify(size_t new_size) {
  p_.resize(new_size * 3);
  q_.resize(new_size * 4);
  log_s_.resize(new_size * 2);
  logit_alpha_.resize(new_size);
  color_.resize(new_size * 3);
}

void MapOptimizer::on_prune(const std::vector<int>& old_to_new) {
  p_.compact(old_to_new, 3);
  q_.compact(old_to_new, 4);
  log_s_.compact(old_to_new, 2);
  logit_alpha_.compact(old_to_new, 1);
  color_.compact(old_to_new, 3);
}

void MapOptimizer::reset() {
  p_.reset();
  q_.reset();
  log_s_.reset();
  logit_alpha_.reset();
  color_.reset();
}

std::vector<LossTraceRow> optimize_window(
    SurfelMap& map, MapOptimizer& opt, const std::vector<const Frame*>& frames,
    const std::vector<Pose>& poses, const std::vector<int>& frame_ids,
    const Intrinsics& K, const MappingConfig& cfg, const RenderConfig& rcfg,
    int iterations) {
  if (frames.empty())
    throw std::invalid_argument("optimize_window: empty frame window");
  if (frames.size() != poses.size() || frames.size() != frame_ids.size())
    throw std::invalid_argument("optimize_window: frames/poses/ids size mismatch");

  if (iterations == 0) return {};  // explicit no-op request
  int iters = iterations > 0 ? iterations : cfg.iterations_per_window;
  double extent = map.extent();

  std::vector<LossTraceRow> trace;
  trace.reserve(static_cast<size_t>(iters));
  for (int it = 0; it < iters; ++it) {
    size_t fi = static_cast<size_t>(it) % frames.size();
    const Frame& frame = *frames[fi];
    RenderOutput rendered = render(map, poses[fi], K, rcfg);
    MappingLoss loss = mapping_loss(rendered, frame, cfg);
    SurfelGrads grads =
        backward_surfels(map, poses[fi], K, rendered, loss.grads, rcfg);
    opt.step(map, grads, cfg, extent);
    accumulate_stats(map, rendered, frame);
    trace.push_back(
        {it, frame_ids[fi], loss.total, loss.color, loss.depth, loss.normal});
  }
  return trace;
}

void append_loss_trace(const std::string& path,
                       const std::vector<LossTraceRow>& rows) {
  bool fresh = !std::filesystem::exists(path);
  std::ofstream f(path, std::ios::app);
  if (!f) throw std::runtime_error("cannot open loss trace: " + path);
  if (fresh) f << "iteration,frame_id,total,color,depth,normal\n";
  for (const LossTraceRow& r : rows) {
    f << r.iteration << ',' << r.frame_id << ',' << r.total << ',' << r.color
      << ',' << r.depth << ',' << r.normal << '\n';
  }
}

}  // namespace sslam
