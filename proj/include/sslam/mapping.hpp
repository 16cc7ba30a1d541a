#pragma once

#include <string>
#include <vector>

#include "sslam/adam.hpp"
#include "sslam/backward.hpp"
#include "sslam/frame.hpp"
#include "sslam/surfel_map.hpp"

namespace sslam {

struct MappingConfig {
  double gamma_d = 1.0;          // depth-term weight
  double gamma_n = 0.1;          // normal-term weight
  int iterations_per_window = 50;
  int map_every = 6;             // frames between scheduled windows
  double lr_p = 1.6e-4;          // multiplied by scene extent at step time
  double lr_q = 1e-3;
  double lr_log_s = 5e-3;
  double lr_logit_alpha = 5e-2;
  double lr_color = 2.5e-3;
  int final_refine_multiplier = 10;
};

/// Loss value split into its three terms plus per-pixel adjoints of the
/// rendered buffers. Color is averaged over all pixels and channels; depth
/// and normal terms are averaged over pixels valid in both the frame and the
/// render (frame depth > 0, rendered weight above the validity floor, and —
/// for the normal term — both normals of usable length). Rendered normals
/// are unit-normalized inside the cosine term.
struct MappingLoss {
  double total = 0.0;
  double color = 0.0;
  double depth = 0.0;
  double normal = 0.0;
  LossGrads grads;
};

MappingLoss mapping_loss(const RenderOutput& render, const Frame& frame,
                         const MappingConfig& cfg);

struct LossTraceRow {
  int iteration = 0;
  int frame_id = 0;
  double total = 0.0, color = 0.0, depth = 0.0, normal = 0.0;
};

/// Per-group adaptive-moment state over the whole surfel map. Owns flat
/// moment arrays that can grow after densification and be compacted after
/// pruning, so the state follows individual surfels.
class MapOptimizer {
public:
  void step(SurfelMap& map, const SurfelGrads& grads, const MappingConfig& cfg,
            double extent);
  void on_densify(size_t new_size);
  void on_prune(const std::vector<int>& old_to_new);
  void reset();

private:
  Adam p_, q_, log_s_, logit_alpha_, color_;
  std::vector<double> params_, grad_buf_;
};

/// One mapping window: `iterations` rounds of render → loss → backward →
/// optimizer step, sampling frames round-robin. Per-pixel residuals are
/// attributed to the pixel's dominant surfel in the map's stats. Passing a
/// negative iteration count uses cfg.iterations_per_window; zero is an
/// explicit no-op. Returns one trace row per iteration.
std::vector<LossTraceRow> optimize_window(
    SurfelMap& map, MapOptimizer& opt, const std::vector<const Frame*>& frames,
    const std::vector<Pose>& poses, const std::vector<int>& frame_ids,
    const Intrinsics& K, const MappingConfig& cfg, const RenderConfig& rcfg,
    int iterations = -1);

/// Appends rows to a CSV loss log (header written when the file is new).
void append_loss_trace(const std::string& path,
                       const std::vector<LossTraceRow>& rows);

}  // namespace sslam
