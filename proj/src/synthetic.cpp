#include "sslam/synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sslam {

namespace {

constexpr double kPi = 3.14159265358979323846;

void add_rect(SyntheticScene& scene, const Eigen::Vector3d& origin,
              const Eigen::Vector3d& eu, const Eigen::Vector3d& ev,
              const Eigen::Vector3d& ca, const Eigen::Vector3d& cb,
              double checker) {
  TexturedPlane p;
  p.origin = origin;
  p.eu = eu;
  p.ev = ev;
  p.color_a = ca;
  p.color_b = cb;
  p.checker = checker;
  scene.planes.push_back(p);
}

// Axis-aligned cuboid as six rectangles.
void add_box(SyntheticScene& scene, const Eigen::Vector3d& lo,
             const Eigen::Vector3d& hi, const Eigen::Vector3d& ca,
             const Eigen::Vector3d& cb, double checker) {
  Eigen::Vector3d d = hi - lo;
  Eigen::Vector3d ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
  add_rect(scene, lo, ex, ey, ca, cb, checker);                       // z = lo
  add_rect(scene, lo + ez, ex, ey, ca, cb, checker);                  // z = hi
  add_rect(scene, lo, ey, ez, ca, cb, checker);                       // x = lo
  add_rect(scene, lo + ex, ey, ez, ca, cb, checker);                  // x = hi
  add_rect(scene, lo, ex, ez, ca, cb, checker);                       // y = lo
  add_rect(scene, lo + ey, ex, ez, ca, cb, checker);                  // y = hi
}

SyntheticScene scene_box50() {
  SyntheticScene s;
  s.name = "box50";
  s.K = Intrinsics{280.0, 280.0, 159.5, 119.5, 320, 240};
  s.centroid = Eigen::Vector3d(0.1, 0.35, 1.9);

  const Eigen::Vector3d wall_a(0.85, 0.82, 0.74), wall_b(0.35, 0.42, 0.55);
  const Eigen::Vector3d floor_a(0.55, 0.45, 0.35), floor_b(0.25, 0.2, 0.16);
  const Eigen::Vector3d side_a(0.7, 0.75, 0.68), side_b(0.3, 0.36, 0.3);
  const Eigen::Vector3d box_a(0.75, 0.3, 0.25), box_b(0.9, 0.65, 0.2);

  // Back wall, floor, side walls.
  add_rect(s, {-2.0, -1.4, 2.5}, {4.0, 0, 0}, {0, 2.8, 0}, wall_a, wall_b, 0.4);
  add_rect(s, {-2.0, 1.2, 0.2}, {4.0, 0, 0}, {0, 0, 2.3}, floor_a, floor_b,
           0.35);
  add_rect(s, {-2.0, -1.4, 0.2}, {0, 2.8, 0}, {0, 0, 2.3}, side_a, side_b, 0.3);
  add_rect(s, {2.0, -1.4, 0.2}, {0, 2.8, 0}, {0, 0, 2.3}, side_b, side_a, 0.3);
  // A box resting on the floor.
  add_box(s, {0.05, 0.6, 1.4}, {0.65, 1.2, 2.0}, box_a, box_b, 0.18);

  const int n_frames = 50;
  for (int i = 0; i < n_frames; ++i) {
    double t = static_cast<double>(i) / (n_frames - 1);
    double ph = 2.0 * kPi * t;
    Eigen::Vector3d c(0.25 * std::sin(0.9 * ph),
                      -0.10 * std::sin(0.6 * ph + 0.5),
                      0.10 * std::sin(0.5 * ph));
    s.trajectory.push_back(look_at(c, s.centroid));
  }
  return s;
}

SyntheticScene scene_edge() {
  SyntheticScene s;
  s.name = "edge";
  s.K = Intrinsics{175.0, 175.0, 99.5, 74.5, 200, 150};
  s.centroid = Eigen::Vector3d(0.0, 0.0, 1.8);

  add_rect(s, {-1.5, -1.1, 2.2}, {3.0, 0, 0}, {0, 2.2, 0},
           {0.82, 0.78, 0.7}, {0.3, 0.38, 0.5}, 0.4);
  // Front face, tilted 5 degrees in-plane so the occluding edge crosses
  // pixel rows at an angle.
  const double th = 5.0 * kPi / 180.0;
  Eigen::Vector3d u_dir(std::cos(th), std::sin(th), 0.0);
  Eigen::Vector3d v_dir(-std::sin(th), std::cos(th), 0.0);
  add_rect(s, {0.02, -1.0, 1.2}, 1.3 * u_dir, 1.9 * v_dir, {0.85, 0.55, 0.2},
           {0.3, 0.15, 0.45}, 0.22);

  s.trajectory.push_back(Pose{});
  return s;
}

SyntheticScene scene_basin() {
  SyntheticScene s;
  s.name = "basin";
  s.K = Intrinsics{130.0, 130.0, 79.5, 59.5, 160, 120};
  s.centroid = Eigen::Vector3d(0.0, 0.3, 2.6);

  add_rect(s, {-2.4, -1.6, 3.2}, {4.8, 0, 0}, {0, 3.2, 0},
           {0.8, 0.78, 0.72}, {0.32, 0.4, 0.55}, 0.5);
  add_rect(s, {-2.4, -1.6, 1.2}, {0, 3.2, 0}, {0, 0, 2.0},
           {0.72, 0.68, 0.6}, {0.28, 0.33, 0.42}, 0.45);
  add_rect(s, {-2.4, 1.6, 1.2}, {4.8, 0, 0}, {0, 0, 2.0},
           {0.5, 0.42, 0.34}, {0.22, 0.18, 0.15}, 0.5);
  add_box(s, {-0.9, 0.8, 2.0}, {-0.3, 1.6, 2.6}, {0.78, 0.3, 0.26},
          {0.85, 0.6, 0.2}, 0.2);
  add_box(s, {0.5, 1.0, 1.8}, {1.1, 1.6, 2.4}, {0.25, 0.45, 0.75},
          {0.6, 0.75, 0.3}, 0.2);

  // 3x3 training grid, 0.1 m spacing, all aimed at the scene anchor.
  for (double gy : {-0.1, 0.0, 0.1})
    for (double gx : {-0.1, 0.0, 0.1})
      s.trajectory.push_back(look_at({gx, gy, 0.0}, s.centroid));
  return s;
}

SyntheticScene scene_plane() {
  SyntheticScene s;
  s.name = "plane";
  s.K = Intrinsics{130.0, 130.0, 79.5, 59.5, 160, 120};
  s.centroid = Eigen::Vector3d(0.0, 0.0, 2.0);
  add_rect(s, {-2.0, -1.5, 2.0}, {4.0, 0, 0}, {0, 3.0, 0},
           {0.75, 0.7, 0.62}, {0.3, 0.34, 0.45}, 0.5);
  s.trajectory.push_back(Pose{});
  return s;
}

SyntheticScene scene_tilt() {
  SyntheticScene s;
  s.name = "tilt";
  s.K = Intrinsics{130.0, 130.0, 79.5, 59.5, 160, 120};
  s.centroid = Eigen::Vector3d(0.0, 0.0, 2.0);
  const double th = 35.0 * kPi / 180.0;
  Eigen::Vector3d ev(0.0, std::cos(th), std::sin(th));
  add_rect(s, Eigen::Vector3d(-2.0, 0, 2.0) - 1.5 * ev, {4.0, 0, 0}, 3.0 * ev,
           {0.75, 0.68, 0.6}, {0.3, 0.36, 0.48}, 0.4);
  s.trajectory.push_back(Pose{});
  return s;
}

}  // namespace

std::optional<RayHit> raycast(const SyntheticScene& scene,
                              const Eigen::Vector3d& origin,
                              const Eigen::Vector3d& dir) {
  RayHit best;
  best.t = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < scene.planes.size(); ++i) {
    const TexturedPlane& p = scene.planes[i];
    Eigen::Vector3d n = p.eu.cross(p.ev);
    double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    double t = n.dot(p.origin - origin) / denom;
    if (t <= 1e-6 || t >= best.t) continue;
    Eigen::Vector3d local = origin + t * dir - p.origin;
    double a = local.dot(p.eu) / p.eu.squaredNorm();
    double b = local.dot(p.ev) / p.ev.squaredNorm();
    if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) continue;
    best.t = t;
    best.plane = static_cast<int>(i);
    best.a = a;
    best.b = b;
  }
  if (best.plane < 0) return std::nullopt;
  return best;
}

Eigen::Vector3d plane_color(const TexturedPlane& p, double a, double b) {
  double su = a * p.eu.norm(), sv = b * p.ev.norm();
  long cell = static_cast<long>(std::floor(su / p.checker)) +
              static_cast<long>(std::floor(sv / p.checker));
  Eigen::Vector3d base = (cell % 2 == 0) ? p.color_a : p.color_b;
  double wave = 0.85 + 0.15 * std::sin(2.0 * kPi * su / (3.1 * p.checker)) *
                           std::cos(2.0 * kPi * sv / (2.7 * p.checker));
  return (base * wave).cwiseMax(0.0).cwiseMin(1.0);
}

Pose look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target) {
  Eigen::Vector3d z = (target - center).normalized();
  Eigen::Vector3d down(0.0, 1.0, 0.0);
  Eigen::Vector3d x = down.cross(z).normalized();
  if (std::abs(down.dot(z)) > 0.999) {  // looking straight up/down
    x = Eigen::Vector3d::UnitX();
    x = (x - x.dot(z) * z).normalized();
  }
  Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R_wc;
  R_wc.col(0) = x;
  R_wc.col(1) = y;
  R_wc.col(2) = z;
  Pose pose;
  pose.R = R_wc.transpose();
  pose.t = -pose.R * center;
  return pose;
}

SyntheticScene make_scene(const std::string& name) {
  if (name == "box50") return scene_box50();
  if (name == "edge") return scene_edge();
  if (name == "basin") return scene_basin();
  if (name == "plane") return scene_plane();
  if (name == "tilt") return scene_tilt();
  throw std::invalid_argument("unknown synthetic scene: " + name);
}

Frame render_synthetic(const SyntheticScene& scene, const Pose& pose,
                       const Intrinsics& K, double noise_sigma, double dropout,
                       uint64_t seed, double timestamp) {
  Frame f;
  f.timestamp = timestamp;
  f.color = ColorImage(K.width, K.height, Eigen::Vector3d::Zero());
  f.depth = GrayImage(K.width, K.height, 0.0);
  f.normal = NormalImage(K.width, K.height, Eigen::Vector3d::Zero());

  Eigen::Matrix3d R_wc = pose.R.transpose();
  Eigen::Vector3d origin = pose.center();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (int row = 0; row < K.height; ++row) {
    for (int col = 0; col < K.width; ++col) {
      Eigen::Vector3d d = K.ray(col, row);
      auto hit = raycast(scene, origin, R_wc * d);
      if (!hit) continue;
      const TexturedPlane& p = scene.planes[static_cast<size_t>(hit->plane)];
      f.color.at(col, row) = plane_color(p, hit->a, hit->b);

      double depth = hit->t;  // ray parameter equals camera z for unit-z rays
      if (noise_sigma > 0.0) depth += noise_sigma * gauss(rng);
      if (dropout > 0.0 && uni(rng) < dropout) depth = 0.0;
      if (depth <= 0.0) continue;  // dropped depth keeps the color sample

      f.depth.at(col, row) = depth;
      Eigen::Vector3d n_cam = pose.R * p.eu.cross(p.ev).normalized();
      if (n_cam.dot(d) > 0.0) n_cam = -n_cam;
      f.normal.at(col, row) = n_cam;
    }
  }
  return f;
}

}  // namespace sslam
