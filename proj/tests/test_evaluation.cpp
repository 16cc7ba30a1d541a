#include <random>

#include "doctest.h"
#include "sslam/evaluation.hpp"

using namespace sslam;

namespace {

std::vector<TrajectoryEntry> random_trajectory(uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  std::vector<TrajectoryEntry> traj;
  for (int i = 0; i < n; ++i) {
    Vector6d xi;
    for (int k = 0; k < 6; ++k) xi[k] = uni(-1.5, 1.5);
    traj.push_back({i * 0.033, exp_se3(xi)});
  }
  return traj;
}

}  // namespace

TEST_CASE("ate: zero against itself") {
  auto traj = random_trajectory(5, 40);
  AteResult r = ate(traj, traj);
  CHECK(r.pairs == 40);
  CHECK(r.rmse < 1e-12);
  CHECK(r.mean < 1e-12);
  CHECK(r.median < 1e-12);
  CHECK(r.max < 1e-12);
}

TEST_CASE("ate: invariant to a rigid disturbance of the estimate") {
  auto gt = random_trajectory(6, 30);
  Vector6d xi;
  xi << 0.4, -1.2, 2.0, 0.3, -0.2, 0.5;
  const Pose disturb = exp_se3(xi);
  auto est = gt;
  // World-to-camera composes with the world disturbance on the right.
  for (auto& e : est) e.pose = e.pose * disturb;
  AteResult r = ate(est, gt);
  CHECK(r.rmse < 1e-9);
  CHECK(r.max < 1e-9);
}

TEST_CASE("ate: recovers the magnitude of isotropic center noise") {
  auto gt = random_trajectory(7, 1000);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> gauss(0.0, 0.01 / std::sqrt(3.0));
  auto est = gt;
  for (auto& e : est) {
    // Perturb the camera center: c' = c + n means t' = -R(c + n).
    Eigen::Vector3d n(gauss(rng), gauss(rng), gauss(rng));
    e.pose.t -= e.pose.R * n;
  }
  AteResult r = ate(est, gt);
  CHECK(r.rmse > 0.009);
  CHECK(r.rmse < 0.011);
  CHECK(r.mean < r.rmse);
  CHECK(r.max > r.rmse);
}

TEST_CASE("ate: median averages the middle pair on even counts") {
  // Timestamps pair 1:1; centers differ by fixed offsets along x only.
  // A pure translation between matched clouds is removed by the alignment,
  // so build errors that cannot be absorbed: alternate signs around zero.
  std::vector<TrajectoryEntry> gt, est;
  const double off[4] = {-0.2, -0.1, 0.1, 0.2};
  for (int i = 0; i < 4; ++i) {
    Pose g;
    g.t = Eigen::Vector3d(i * 1.0, i % 2, 0);  // non-degenerate shape
    gt.push_back({i * 1.0, g});
    Pose e = g;
    e.t.y() -= off[i];  // center shifts by +off in y
    est.push_back({i * 1.0, e});
  }
  AteResult r = ate(est, gt);
  CHECK(r.pairs == 4);
  // After optimal alignment the errors stay symmetric; the median must be
  // the average of the two middle values, not either one of them.
  std::vector<double> errs;
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector3d c = est[i].pose.center(), g = gt[i].pose.center();
    Eigen::Vector4d ch(c.x(), c.y(), c.z(), 1.0);
    errs.push_back(((r.alignment * ch).head<3>() - g).norm());
  }
  std::sort(errs.begin(), errs.end());
  CHECK(r.median == doctest::Approx(0.5 * (errs[1] + errs[2])).epsilon(1e-12));
  CHECK(r.max == doctest::Approx(errs[3]).epsilon(1e-12));
}

TEST_CASE("ate: similarity mode absorbs a global scale, rigid does not") {
  auto gt = random_trajectory(8, 25);
  auto est = gt;
  for (auto& e : est) {
    Eigen::Vector3d c = e.pose.center() * 1.25;
    e.pose.t = -(e.pose.R * c);
  }
  CHECK(ate(est, gt, AlignMode::Similarity).rmse < 1e-9);
  CHECK(ate(est, gt, AlignMode::Rigid).rmse > 0.05);
}

TEST_CASE("ate: throws below three associated pairs") {
  auto gt = random_trajectory(9, 10);
  auto est = gt;
  for (size_t i = 0; i < est.size(); ++i) est[i].timestamp += 10.0;  // no overlap
  CHECK_THROWS_AS(ate(est, gt), std::invalid_argument);
}

TEST_CASE("geom metrics: identical clouds score perfectly") {
  std::mt19937_64 rng(11);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  std::vector<Eigen::Vector3d> cloud;
  for (int i = 0; i < 500; ++i)
    cloud.emplace_back(uni(-2, 2), uni(-2, 2), uni(-2, 2));
  GeomResult r = geom_metrics(cloud, cloud, 0.03);
  CHECK(r.accuracy_cm == doctest::Approx(0.0));
  CHECK(r.completion_cm == doctest::Approx(0.0));
  CHECK(r.precision == doctest::Approx(100.0));
  CHECK(r.recall == doctest::Approx(100.0));
  CHECK(r.f1 == doctest::Approx(100.0));
}

TEST_CASE("geom metrics: uniform 1cm shift reads back as 1cm") {
  std::mt19937_64 rng(13);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  std::vector<Eigen::Vector3d> gt;
  for (int i = 0; i < 400; ++i) gt.emplace_back(uni(0, 1), uni(0, 1), uni(0, 1));
  std::vector<Eigen::Vector3d> pred = gt;
  for (auto& p : pred) p.x() += 0.01;
  GeomResult r = geom_metrics(pred, gt, 0.03);
  // Nearest neighbor of each shifted point is at most 1cm away (its own
  // source point), possibly closer via a different point.
  CHECK(r.accuracy_cm <= 1.0 + 1e-9);
  CHECK(r.accuracy_cm > 0.5);
  CHECK(r.precision == doctest::Approx(100.0));
  CHECK(r.recall == doctest::Approx(100.0));

  // With a 5mm threshold the shifted cloud largely misses.
  GeomResult tight = geom_metrics(pred, gt, 0.005);
  CHECK(tight.precision < 50.0);
}

TEST_CASE("geom metrics: half coverage halves recall, keeps precision") {
  std::vector<Eigen::Vector3d> gt;
  for (int i = 0; i < 300; ++i)
    gt.emplace_back(0.05 * i, 0.0, 0.0);  // 5cm spacing beats the threshold
  std::vector<Eigen::Vector3d> pred(gt.begin(), gt.begin() + 150);
  GeomResult r = geom_metrics(pred, gt, 0.03);
  CHECK(r.precision == doctest::Approx(100.0));
  CHECK(r.recall == doctest::Approx(50.0));
  CHECK(r.f1 == doctest::Approx(2.0 * 100.0 * 50.0 / 150.0));

  CHECK_THROWS_AS(geom_metrics({}, gt, 0.03), std::invalid_argument);
}

TEST_CASE("grid index: exact nearest neighbor against brute force") {
  std::mt19937_64 rng(17);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  for (double cell : {0.03, 0.11, 0.5}) {
    std::vector<Eigen::Vector3d> pts;
    for (int i = 0; i < 2000; ++i) {
      // Mix of a dense slab and far outliers to exercise shell expansion.
      if (i % 17 == 0)
        pts.emplace_back(uni(-30, 30), uni(-30, 30), uni(-30, 30));
      else
        pts.emplace_back(uni(-1, 1), uni(-1, 1), uni(-0.1, 0.1));
    }
    GridIndex index(pts, cell);
    for (int t = 0; t < 400; ++t) {
      Eigen::Vector3d q(uni(-3, 3), uni(-3, 3), uni(-3, 3));
      if (t % 10 == 0) q = pts[rng() % pts.size()];  // exact hits included
      double brute = 1e300;
      for (const auto& p : pts) brute = std::min(brute, (p - q).norm());
      CHECK(index.nearest_distance(q) == doctest::Approx(brute).epsilon(1e-12));
    }
  }
}
