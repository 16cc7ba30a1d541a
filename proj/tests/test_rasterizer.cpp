#include <cmath>
#include <random>

#include "doctest.h"
#include "sslam/rasterizer.hpp"
#include "sslam/surfel_map.hpp"

using namespace sslam;

namespace {

Surfel make_surfel(const Eigen::Vector3d& p, const Eigen::Quaterniond& q,
                   double su, double sv, double alpha,
                   const Eigen::Vector3d& color) {
  Surfel s;
  s.p = p;
  s.q = q;
  s.log_s = Eigen::Vector2d(std::log(su), std::log(sv));
  // logit of the requested opacity
  s.logit_alpha = std::log(alpha / (1.0 - alpha));
  s.color = color;
  return s;
}

const Intrinsics kSmallK{10.0, 10.0, 3.5, 3.5, 8, 8};

double logit(double a) { return std::log(a / (1.0 - a)); }

SurfelMap random_map(uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  SurfelMap map;
  for (int i = 0; i < n; ++i) {
    Eigen::Quaterniond q(uni(-1, 1), uni(-1, 1), uni(-1, 1), uni(-1, 1));
    while (q.norm() < 0.2)
      q = Eigen::Quaterniond(uni(-1, 1), uni(-1, 1), uni(-1, 1), uni(-1, 1));
    q.normalize();
    map.add(make_surfel(
        {uni(-0.5, 0.5), uni(-0.5, 0.5), uni(1.0, 3.0)}, q, uni(0.05, 0.4),
        uni(0.05, 0.4), uni(0.05, 0.95),
        {uni(0, 1), uni(0, 1), uni(0, 1)}));
  }
  return map;
}

}  // namespace

TEST_CASE("intersect: fronto-parallel disk, hand-solved") {
  // Disk at (0.2, 0, 2) facing the camera, identity orientation: tangent
  // frame is the world frame, normal +z. Ray through pixel (cx + 10, cy)
  // has direction ((10/fx), 0, 1) before normalization inside the caller;
  // intersect() takes the unnormalized ray with z = 1 convention.
  Surfel s = make_surfel({0.2, 0.0, 2.0}, Eigen::Quaterniond::Identity(), 0.1,
                         0.2, 0.5, {1, 0, 0});
  RenderConfig rc;
  rc.gauss_cutoff = 100.0;

  // Central ray: hit at (0,0,2), offset from center = (-0.2, 0, 0),
  // u = -0.2/0.1 = -2, v = 0, G = exp(-2).
  auto hit = intersect(s, Eigen::Vector3d(0, 0, 1), Pose{}, rc);
  REQUIRE(hit.has_value());
  CHECK(hit->z == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(hit->u == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(hit->v == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hit->gauss == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));

  // Ray aimed exactly at the center: d = (0.1, 0, 1), z stays 2 because the
  // plane is fronto-parallel; u = v = 0, G = 1.
  hit = intersect(s, Eigen::Vector3d(0.1, 0, 1), Pose{}, rc);
  REQUIRE(hit.has_value());
  CHECK(hit->z == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(hit->gauss == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("intersect: tilted disk depth from the plane equation") {
  // Normal rotated 45 degrees about y: n = (sin45, 0, cos45)... rotating
  // identity by +45deg about y maps +z to (sin45, 0, cos45).
  const double c = std::cos(M_PI / 8), s_ = std::sin(M_PI / 8);
  Eigen::Quaterniond q(c, 0, s_, 0);  // rotation of pi/4 about y
  Surfel s = make_surfel({0, 0, 2}, q, 0.3, 0.3, 0.5, {1, 1, 1});
  RenderConfig rc;
  rc.gauss_cutoff = 1e6;

  const Eigen::Vector3d n = q.toRotationMatrix().col(2);
  const Eigen::Vector3d d(0.05, -0.02, 1.0);
  // Plane: n . (x - p) = 0 with x = z * d  =>  z = (n . p) / (n . d).
  const double z_expect = n.dot(Eigen::Vector3d(0, 0, 2)) / n.dot(d);
  auto hit = intersect(s, d, Pose{}, rc);
  REQUIRE(hit.has_value());
  CHECK(hit->z == doctest::Approx(z_expect).epsilon(1e-12));

  // The hit point must lie on the plane and (u, v) must reconstruct it.
  const Eigen::Vector3d x = hit->z * d;
  CHECK(std::abs(n.dot(x - s.p)) < 1e-12);
  const Eigen::Vector3d rebuilt = s.p +
                                  hit->u * 0.3 * q.toRotationMatrix().col(0) +
                                  hit->v * 0.3 * q.toRotationMatrix().col(1);
  CHECK((rebuilt - x).norm() < 1e-10);
}

TEST_CASE("intersect: rejects parallel, behind-near and cutoff cases") {
  RenderConfig rc;
  // Disk edge-on to the ray: normal perpendicular to d.
  Eigen::Quaterniond q(std::cos(M_PI / 4), 0, std::sin(M_PI / 4), 0);  // 90deg
  Surfel edge_on = make_surfel({0, 0, 2}, q, 0.2, 0.2, 0.5, {1, 1, 1});
  CHECK(!intersect(edge_on, Eigen::Vector3d(0, 0, 1), Pose{}, rc).has_value());

  Surfel behind = make_surfel({0, 0, -1}, Eigen::Quaterniond::Identity(), 0.2,
                              0.2, 0.5, {1, 1, 1});
  CHECK(!intersect(behind, Eigen::Vector3d(0, 0, 1), Pose{}, rc).has_value());

  // Far outside the 3-sigma default cutoff: u = 10 sigma.
  Surfel narrow = make_surfel({1.0, 0, 2.0}, Eigen::Quaterniond::Identity(),
                              0.1, 0.1, 0.5, {1, 1, 1});
  CHECK(!intersect(narrow, Eigen::Vector3d(0, 0, 1), Pose{}, rc).has_value());
}

TEST_CASE("render: single surfel alpha blend against closed form") {
  SurfelMap map;
  map.add(make_surfel({0, 0, 2}, Eigen::Quaterniond::Identity(),
                                    0.5, 0.5, 0.7, {0.9, 0.3, 0.1}));
  RenderConfig rc;
  rc.threads = 1;
  rc.t_min = 0;
  rc.alpha_min = 0;
  RenderOutput out = render(map, Pose{}, kSmallK, rc);

  // Pixel (3, 2): ray d = ((3-3.5)/10, (2-3.5)/10, 1) = (-0.05, -0.15, 1).
  // Fronto-parallel plane at z=2: hit (z*dx, z*dy, 2), u = 2*dx/0.5 etc.
  const double u = 2.0 * -0.05 / 0.5, v = 2.0 * -0.15 / 0.5;
  const double g = std::exp(-0.5 * (u * u + v * v));
  const double a = 0.7 * g;
  const Eigen::Vector3d expect_color = a * Eigen::Vector3d(0.9, 0.3, 0.1);
  CHECK((out.color.at(3, 2) - expect_color).norm() < 1e-12);
  CHECK(out.depth.at(3, 2) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out.transmittance.at(3, 2) == doctest::Approx(1.0 - a).epsilon(1e-12));
  CHECK(out.alpha_sum.at(3, 2) == doctest::Approx(a).epsilon(1e-12));
  // Blended normal is weight * camera-frame normal (unnormalized).
  CHECK((out.normal.at(3, 2) - a * Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
  CHECK(out.dominant_id.at(3, 2) == 0);
  // Single hit: no depth spread.
  CHECK(out.distortion.at(3, 2) == doctest::Approx(0.0));
}

TEST_CASE("render: two-surfel front-to-back compositing oracle") {
  // Both fronto-parallel and wide, so G = 1 only exactly on the central ray;
  // check the central pixel... use a pixel whose ray passes through both
  // centers: put both centers on the optical axis.
  SurfelMap map;
  map.add(make_surfel({0, 0, 1.5}, Eigen::Quaterniond::Identity(),
                                    2.0, 2.0, 0.6, {1, 0, 0}));
  map.add(make_surfel({0, 0, 2.5}, Eigen::Quaterniond::Identity(),
                                    2.0, 2.0, 0.5, {0, 1, 0}));
  RenderConfig rc;
  rc.threads = 1;
  rc.t_min = 0;
  rc.alpha_min = 0;
  rc.depth_mode = DepthMode::Mean;
  Intrinsics K{10, 10, 2.0, 2.0, 5, 5};  // pixel (2,2) is the optical axis
  RenderOutput out = render(map, Pose{}, K, rc);

  const double g1 = 1.0, g2 = 1.0;
  const double a1 = 0.6 * g1, a2 = 0.5 * g2;
  const double w1 = a1, w2 = a2 * (1 - a1);
  const Eigen::Vector3d expect_color =
      w1 * Eigen::Vector3d(1, 0, 0) + w2 * Eigen::Vector3d(0, 1, 0);
  CHECK((out.color.at(2, 2) - expect_color).norm() < 1e-12);
  CHECK(out.depth.at(2, 2) ==
        doctest::Approx((w1 * 1.5 + w2 * 2.5) / (w1 + w2)).epsilon(1e-12));
  CHECK(out.transmittance.at(2, 2) ==
        doctest::Approx((1 - a1) * (1 - a2)).epsilon(1e-12));
  // Ordered-pair spread: w1*w2*|z2-z1| counted twice.
  CHECK(out.distortion.at(2, 2) ==
        doctest::Approx(2.0 * w1 * w2 * 1.0).epsilon(1e-12));
  CHECK(out.dominant_id.at(2, 2) == 0);  // w1 > w2
  CHECK(out.dominant_depth.at(2, 2) == doctest::Approx(1.5));
}

TEST_CASE("render: weights plus final transmittance telescope to one") {
  // alpha_sum + T == 1 is an identity of front-to-back blending; it must
  // hold with the skip floors enabled or disabled, on any map.
  for (uint64_t seed : {11u, 12u, 13u}) {
    SurfelMap map = random_map(seed, 40);
    for (bool floors : {false, true}) {
      RenderConfig rc;
      rc.threads = 1;
      if (!floors) {
        rc.t_min = 0;
        rc.alpha_min = 0;
      }
      RenderOutput out = render(map, Pose{}, kSmallK, rc);
      for (int r = 0; r < out.height; ++r)
        for (int c = 0; c < out.width; ++c) {
          CHECK(out.alpha_sum.at(c, r) + out.transmittance.at(c, r) ==
                doctest::Approx(1.0).epsilon(1e-5));
          CHECK(out.transmittance.at(c, r) >= 0.0);
          CHECK(out.transmittance.at(c, r) <= 1.0 + 1e-12);
        }
    }
  }
}

TEST_CASE("render: adding surfels never increases transmittance") {
  SurfelMap small = random_map(21, 15);
  SurfelMap big = small;
  SurfelMap extra = random_map(22, 10);
  for (const auto& s : extra.surfels()) big.add(s);
  RenderConfig rc;
  rc.threads = 1;
  rc.t_min = 0;
  rc.alpha_min = 0;
  RenderOutput a = render(small, Pose{}, kSmallK, rc);
  RenderOutput b = render(big, Pose{}, kSmallK, rc);
  for (int r = 0; r < a.height; ++r)
    for (int c = 0; c < a.width; ++c)
      CHECK(b.transmittance.at(c, r) <= a.transmittance.at(c, r) + 1e-12);
}

TEST_CASE("render: median depth sits inside the hit-depth range") {
  SurfelMap map = random_map(33, 30);
  double zmin = 1e9, zmax = -1e9;
  for (const auto& s : map.surfels()) {
    zmin = std::min(zmin, s.p.z() - 1.0);  // generous slack for tilt
    zmax = std::max(zmax, s.p.z() + 1.0);
  }
  RenderConfig rc;
  rc.threads = 1;
  rc.depth_mode = DepthMode::Median;
  RenderOutput out = render(map, Pose{}, kSmallK, rc);
  for (int r = 0; r < out.height; ++r)
    for (int c = 0; c < out.width; ++c) {
      if (out.alpha_sum.at(c, r) <= 0) continue;
      CHECK(out.depth.at(c, r) >= zmin);
      CHECK(out.depth.at(c, r) <= zmax);
    }
}

TEST_CASE("render: median picks the half-weight crossing, falls back to last") {
  SurfelMap map;
  // Three stacked fronto-parallel disks on the optical axis.
  map.add(make_surfel({0, 0, 1.0}, Eigen::Quaterniond::Identity(),
                                    2, 2, 0.3, {1, 0, 0}));
  map.add(make_surfel({0, 0, 2.0}, Eigen::Quaterniond::Identity(),
                                    2, 2, 0.5, {0, 1, 0}));
  map.add(make_surfel({0, 0, 3.0}, Eigen::Quaterniond::Identity(),
                                    2, 2, 0.9, {0, 0, 1}));
  RenderConfig rc;
  rc.threads = 1;
  rc.t_min = 0;
  rc.alpha_min = 0;
  rc.depth_mode = DepthMode::Median;
  Intrinsics K{10, 10, 2.0, 2.0, 5, 5};
  RenderOutput out = render(map, Pose{}, K, rc);
  // Weights: w1 = .3, w2 = .5*.7 = .35 (acc .65 > .5 here), so the median
  // hit is the second surfel at z = 2.
  CHECK(out.depth.at(2, 2) == doctest::Approx(2.0).epsilon(1e-12));

  // With opacities so low that accumulated weight never reaches 0.5, the
  // last hit is used.
  for (auto& s : map.surfels()) s.logit_alpha = logit(0.1);
  out = render(map, Pose{}, K, rc);
  CHECK(out.depth.at(2, 2) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("distortion_term matches the brute-force pairwise sum") {
  std::mt19937_64 rng(99);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 24);
    std::vector<double> w(n), z(n);
    for (int i = 0; i < n; ++i) {
      w[i] = uni(0.0, 1.0);
      z[i] = uni(0.5, 5.0);
    }
    double brute = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        brute += w[i] * w[j] * std::abs(z[i] - z[j]);
    const double fast = distortion_term(w, z);
    CHECK(std::abs(fast - brute) <
          1e-10 * std::max(1.0, std::abs(brute)));
  }
}

TEST_CASE("adaptive mode substitutes the dominant surface on split pixels") {
  // Two well-separated sheets along the same rays: the blend mean lands
  // between them (behind the dominant front sheet) and the depth spread is
  // far above the threshold, so the adaptive mode must snap to the front
  // sheet's depth and normal.
  SurfelMap map;
  map.add(make_surfel({0, 0, 1.5}, Eigen::Quaterniond::Identity(),
                                    2, 2, 0.5, {1, 0, 0}));
  map.add(make_surfel({0, 0, 2.5}, Eigen::Quaterniond::Identity(),
                                    2, 2, 0.4, {0, 1, 0}));
  RenderConfig rc;
  rc.threads = 1;
  rc.t_min = 0;
  rc.alpha_min = 0;
  rc.depth_mode = DepthMode::Adaptive;
  Intrinsics K{10, 10, 2.0, 2.0, 5, 5};
  RenderOutput out = render(map, Pose{}, K, rc);

  const double w1 = 0.5, w2 = 0.4 * 0.5;  // 0.2; mean = 1.786 > 1.5
  const double dd = 2.0 * w1 * w2 * 1.0;  // 0.2 >> tau
  REQUIRE(dd > rc.tau);
  CHECK(out.substituted.at(2, 2) == 1);
  CHECK(out.depth.at(2, 2) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK((out.normal.at(2, 2).normalized() -
         Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);

  // Same geometry in Mean mode keeps the blend average and no flag.
  rc.depth_mode = DepthMode::Mean;
  RenderOutput mean_out = render(map, Pose{}, K, rc);
  CHECK(mean_out.substituted.at(2, 2) == 0);
  CHECK(mean_out.depth.at(2, 2) ==
        doctest::Approx((w1 * 1.5 + w2 * 2.5) / (w1 + w2)).epsilon(1e-12));

  // A single coherent sheet stays un-substituted in Adaptive mode.
  SurfelMap single;
  single.add(make_surfel(
      {0, 0, 1.5}, Eigen::Quaterniond::Identity(), 2, 2, 0.9, {1, 0, 0}));
  rc.depth_mode = DepthMode::Adaptive;
  RenderOutput coherent = render(single, Pose{}, K, rc);
  CHECK(coherent.substituted.at(2, 2) == 0);
  CHECK(coherent.depth.at(2, 2) == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("depth-offset hook: capture then apply reproduces the render") {
  SurfelMap map = random_map(55, 25);
  RenderConfig rc;
  rc.threads = 1;  // the hook's map is not synchronized
  DepthOffsetHook hook;
  hook.mode = DepthOffsetHook::Mode::Capture;
  rc.depth_offset = &hook;
  RenderOutput captured = render(map, Pose{}, kSmallK, rc);
  CHECK(!hook.offsets.empty());

  hook.mode = DepthOffsetHook::Mode::Apply;
  RenderOutput applied = render(map, Pose{}, kSmallK, rc);
  for (int r = 0; r < captured.height; ++r)
    for (int c = 0; c < captured.width; ++c) {
      CHECK(applied.depth.at(c, r) ==
            doctest::Approx(captured.depth.at(c, r)).epsilon(1e-12));
      CHECK(applied.distortion.at(c, r) ==
            doctest::Approx(captured.distortion.at(c, r)).epsilon(1e-12));
      // Blend weights never route through the hook.
      CHECK(applied.alpha_sum.at(c, r) == captured.alpha_sum.at(c, r));
      CHECK((applied.color.at(c, r) - captured.color.at(c, r)).norm() == 0.0);
    }
}

TEST_CASE("render: deterministic across thread counts") {
  SurfelMap map = random_map(77, 60);
  RenderConfig rc1;
  rc1.threads = 1;
  RenderConfig rc4 = rc1;
  rc4.threads = 4;
  RenderOutput a = render(map, Pose{}, kSmallK, rc1);
  RenderOutput b = render(map, Pose{}, kSmallK, rc4);
  for (int r = 0; r < a.height; ++r)
    for (int c = 0; c < a.width; ++c) {
      CHECK(a.depth.at(c, r) == b.depth.at(c, r));
      CHECK((a.color.at(c, r) - b.color.at(c, r)).norm() == 0.0);
      CHECK(a.transmittance.at(c, r) == b.transmittance.at(c, r));
    }
}

TEST_CASE("render context: candidates sorted near-to-far and tiled") {
  SurfelMap map = random_map(88, 30);
  RenderConfig rc;
  RenderContext ctx = build_render_context(map, Pose{}, kSmallK, rc);
  for (size_t i = 1; i < ctx.cam_surfels.size(); ++i)
    CHECK(ctx.cam_surfels[i - 1].center.z() <= ctx.cam_surfels[i].center.z());
  CHECK(ctx.tiles_x * ctx.tiles_y == static_cast<int>(ctx.tile_lists.size()));
}
