#include "sslam/evaluation.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "sslam/tum.hpp"

namespace sslam {

namespace {

uint64_t cell_key(int64_t x, int64_t y, int64_t z) {
  auto wrap = [](int64_t v) {
    return static_cast<uint64_t>(v + (1 << 20)) & 0x1FFFFF;
  };
  return (wrap(x) << 42) | (wrap(y) << 21) | wrap(z);
}

int64_t cell_coord(double v, double cell) {
  return static_cast<int64_t>(std::floor(v / cell));
}

}  // namespace

AteResult ate(const std::vector<TrajectoryEntry>& est,
              const std::vector<TrajectoryEntry>& gt, AlignMode mode,
              double max_gap) {
  std::vector<double> t_est, t_gt;
  for (const TrajectoryEntry& e : est) t_est.push_back(e.timestamp);
  for (const TrajectoryEntry& e : gt) t_gt.push_back(e.timestamp);
  auto matches = associate_timestamps(t_est, t_gt, max_gap);
  if (matches.size() < 3)
    throw std::invalid_argument(
        "ate: need >= 3 associated pose pairs, got " +
        std::to_string(matches.size()));

  Eigen::Matrix3Xd src(3, matches.size()), dst(3, matches.size());
  for (size_t k = 0; k < matches.size(); ++k) {
    src.col(static_cast<Eigen::Index>(k)) = est[matches[k].first].pose.center();
    dst.col(static_cast<Eigen::Index>(k)) = gt[matches[k].second].pose.center();
  }

  Eigen::Matrix4d T =
      Eigen::umeyama(src, dst, mode == AlignMode::Similarity);

  AteResult r;
  r.alignment = T;
  r.pairs = static_cast<int>(matches.size());
  std::vector<double> errs(matches.size());
  double sq_sum = 0.0;
  for (size_t k = 0; k < matches.size(); ++k) {
    Eigen::Vector3d aligned =
        T.topLeftCorner<3, 3>() * src.col(static_cast<Eigen::Index>(k)) +
        T.topRightCorner<3, 1>();
    double e = (aligned - dst.col(static_cast<Eigen::Index>(k))).norm();
    errs[k] = e;
    sq_sum += e * e;
    r.mean += e;
    r.max = std::max(r.max, e);
  }
  r.rmse = std::sqrt(sq_sum / static_cast<double>(errs.size()));
  r.mean /= static_cast<double>(errs.size());
  std::sort(errs.begin(), errs.end());
  size_t n = errs.size();
  r.median = n % 2 == 1 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
  return r;
}

GridIndex::GridIndex(const std::vector<Eigen::Vector3d>& points, double cell)
    : points_(points), cell_(cell) {
  if (cell <= 0.0) throw std::invalid_argument("GridIndex: cell must be > 0");
  for (size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d& p = points[i];
    cells_[cell_key(cell_coord(p.x(), cell), cell_coord(p.y(), cell),
                    cell_coord(p.z(), cell))]
        .push_back(static_cast<int>(i));
  }
}

double GridIndex::nearest_distance(const Eigen::Vector3d& q) const {
  if (cells_.empty()) return std::numeric_limits<double>::infinity();
  int64_t cx = cell_coord(q.x(), cell_);
  int64_t cy = cell_coord(q.y(), cell_);
  int64_t cz = cell_coord(q.z(), cell_);
  double best = std::numeric_limits<double>::infinity();

  for (int64_t k = 0;; ++k) {
    // Any point in a cell at Chebyshev ring k is at least (k-1)*cell away,
    // so once the current best is inside that bound the search is complete.
    if (k > 0 && static_cast<double>(k - 1) * cell_ >= best) break;
    for (int64_t dx = -k; dx <= k; ++dx) {
      for (int64_t dy = -k; dy <= k; ++dy) {
        for (int64_t dz = -k; dz <= k; ++dz) {
          if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != k)
            continue;  // interior cells were handled by earlier rings
          auto it = cells_.find(cell_key(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (int idx : it->second)
            best = std::min(best, (points_[static_cast<size_t>(idx)] - q).norm());
        }
      }
    }
  }
  return best;
}

GeomResult geom_metrics(const std::vector<Eigen::Vector3d>& pred,
                        const std::vector<Eigen::Vector3d>& gt,
                        double thresh) {
  if (pred.empty() || gt.empty())
    throw std::invalid_argument("geom_metrics: empty point set");

  GridIndex gt_index(gt, thresh);
  GridIndex pred_index(pred, thresh);

  GeomResult r;
  long pred_hits = 0;
  for (const Eigen::Vector3d& p : pred) {
    double d = gt_index.nearest_distance(p);
    r.accuracy_cm += d;
    if (d < thresh) ++pred_hits;
  }
  long gt_hits = 0;
  for (const Eigen::Vector3d& p : gt) {
    double d = pred_index.nearest_distance(p);
    r.completion_cm += d;
    if (d < thresh) ++gt_hits;
  }
  r.accuracy_cm = r.accuracy_cm / static_cast<double>(pred.size()) * 100.0;
  r.completion_cm = r.completion_cm / static_cast<double>(gt.size()) * 100.0;
  r.precision = 100.0 * static_cast<double>(pred_hits) /
                static_cast<double>(pred.size());
  r.recall =
      100.0 * static_cast<double>(gt_hits) / static_cast<double>(gt.size());
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

}  // namespace sslam
