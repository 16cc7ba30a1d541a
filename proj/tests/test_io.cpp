#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "sslam/image_io.hpp"
#include "sslam/ply.hpp"
#include "sslam/png_io.hpp"
#include "sslam/synthetic.hpp"
#include "sslam/trajectory_io.hpp"
#include "sslam/tum.hpp"

using namespace sslam;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test run.
fs::path scratch() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "sslam_io_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("trajectory: identity pose serializes to the canonical line") {
  fs::path p = scratch() / "identity.txt";
  write_trajectory_tum(p.string(), {TrajectoryEntry{0.0, Pose{}}});
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  CHECK(line == "0.000000 0 0 0 0 0 0 1");
}

TEST_CASE("trajectory: world-to-camera poses round-trip through the file") {
  std::mt19937_64 rng(31);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  std::vector<TrajectoryEntry> traj;
  for (int i = 0; i < 12; ++i) {
    Vector6d xi;
    for (int k = 0; k < 6; ++k) xi[k] = uni(-1.0, 1.0);
    traj.push_back({1311868164.363 + 0.033 * i, exp_se3(xi)});
  }
  fs::path p = scratch() / "traj.txt";
  write_trajectory_tum(p.string(), traj);
  auto back = read_trajectory_tum(p.string());
  REQUIRE(back.size() == traj.size());
  for (size_t i = 0; i < traj.size(); ++i) {
    CHECK(back[i].timestamp == doctest::Approx(traj[i].timestamp).epsilon(1e-9));
    // The file stores camera-to-world; reading must invert back.
    CHECK((back[i].pose.t - traj[i].pose.t).norm() < 1e-6);
    CHECK(rotation_angle(back[i].pose.R, traj[i].pose.R) < 1e-6);
  }

  // Comment lines and blank lines are ignored.
  std::ofstream app(p, std::ios::app);
  app << "\n# trailing comment\n";
  app.close();
  CHECK(read_trajectory_tum(p.string()).size() == traj.size());
}

TEST_CASE("ply points: payload survives write/read including colors") {
  PointCloud pc;
  std::mt19937_64 rng(7);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  for (int i = 0; i < 257; ++i) {
    pc.points.emplace_back(uni(-5, 5), uni(-5, 5), uni(-5, 5));
    pc.normals.push_back(
        Eigen::Vector3d(uni(-1, 1), uni(-1, 1), uni(-1, 1)).normalized());
    pc.colors.emplace_back(uni(0, 1), uni(0, 1), uni(0, 1));
  }
  fs::path p = scratch() / "cloud.ply";
  write_ply_points(p.string(), pc);
  PointCloud back = read_ply_points(p.string());
  REQUIRE(back.size() == pc.size());
  for (size_t i = 0; i < pc.size(); ++i) {
    CHECK((back.points[i] - pc.points[i]).norm() < 1e-5);    // float storage
    CHECK((back.normals[i] - pc.normals[i]).norm() < 1e-5);
    CHECK((back.colors[i] - pc.colors[i]).cwiseAbs().maxCoeff() <
          1.0 / 255 + 1e-9);  // uchar quantization
  }
}

TEST_CASE("ply surfels: map round-trips with an orthonormal frame") {
  SurfelMap map;
  std::mt19937_64 rng(12);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  for (int i = 0; i < 64; ++i) {
    Surfel s;
    s.p = Eigen::Vector3d(uni(-2, 2), uni(-2, 2), uni(0.5, 4));
    Eigen::Quaterniond q(uni(-1, 1), uni(-1, 1), uni(-1, 1), uni(-1, 1));
    while (q.norm() < 0.2)
      q = Eigen::Quaterniond(uni(-1, 1), uni(-1, 1), uni(-1, 1), uni(-1, 1));
    q.normalize();
    s.q = q;
    s.log_s = Eigen::Vector2d(std::log(uni(0.01, 0.5)), std::log(uni(0.01, 0.5)));
    s.logit_alpha = uni(-4, 4);
    s.color = Eigen::Vector3d(uni(0, 1), uni(0, 1), uni(0, 1));
    map.add(s);
  }
  fs::path p = scratch() / "map.ply";
  write_ply_surfels(p.string(), map);
  SurfelMap back = read_ply_surfels(p.string());
  REQUIRE(back.size() == map.size());
  for (size_t i = 0; i < map.size(); ++i) {
    const Surfel& a = map[i];
    const Surfel& b = back[i];
    CHECK((a.p - b.p).norm() < 1e-5);
    CHECK(std::abs(a.su() - b.su()) < 1e-5);
    CHECK(std::abs(a.sv() - b.sv()) < 1e-5);
    CHECK(std::abs(a.alpha() - b.alpha()) < 1e-5);
    CHECK((a.color - b.color).norm() < 1e-5);
    // The quaternion may differ (sign, tangent-v reconstruction) but the
    // frame it encodes must match.
    CHECK((a.normal() - b.normal()).norm() < 1e-4);
    CHECK((a.tangent_u() - b.tangent_u()).norm() < 1e-4);
    Eigen::Matrix3d R = b.rotation();
    CHECK((R * R.transpose() - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    CHECK(R.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("png: color and 16-bit gray round-trips") {
  ColorImage img(17, 9);
  std::mt19937_64 rng(3);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 17; ++c)
      img.at(c, r) = Eigen::Vector3d((rng() % 256) / 255.0,
                                     (rng() % 256) / 255.0,
                                     (rng() % 256) / 255.0);
  fs::path p = scratch() / "c.png";
  write_png_color(p.string(), img);
  ColorImage back = read_png_color(p.string());
  REQUIRE(back.width() == 17);
  REQUIRE(back.height() == 9);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 17; ++c)
      CHECK((back.at(c, r) - img.at(c, r)).cwiseAbs().maxCoeff() <
            0.5 / 255 + 1e-12);

  Image<uint16_t> depth(13, 7);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 13; ++c)
      depth.at(c, r) = static_cast<uint16_t>(rng() % 65536);
  fs::path dp = scratch() / "d.png";
  write_png_gray16(dp.string(), depth);
  Image<uint16_t> dback = read_png_gray16(dp.string());
  REQUIRE(dback.width() == 13);
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 13; ++c) CHECK(dback.at(c, r) == depth.at(c, r));
}

TEST_CASE("ppm/pgm: debug dumps round-trip within quantization") {
  ColorImage img(6, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c)
      img.at(c, r) = Eigen::Vector3d(c / 6.0, r / 4.0, 0.5);
  fs::path p = scratch() / "img.ppm";
  write_ppm(p.string(), img);
  ColorImage back = read_ppm(p.string());
  // Round-to-nearest leaves at most half a count of error; values exactly
  // between two codes (e.g. 0.5) land on the boundary itself.
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 6; ++c)
      CHECK((back.at(c, r) - img.at(c, r)).cwiseAbs().maxCoeff() <=
            0.5 / 255 + 1e-12);

  GrayImage depth(5, 3, 0.0);
  depth.at(2, 1) = 1.2345;
  depth.at(4, 2) = 0.0002;  // rounds to one count at scale 5000
  fs::path gp = scratch() / "img.pgm";
  write_pgm16(gp.string(), depth, 5000.0);
  GrayImage dback = read_pgm16(gp.string(), 5000.0);
  CHECK(dback.at(2, 1) == doctest::Approx(1.2345).epsilon(1e-4));
  CHECK(dback.at(0, 0) == 0.0);
  CHECK(dback.at(4, 2) == doctest::Approx(0.0002).epsilon(1e-6));
}

TEST_CASE("timestamp association: documented pairing examples") {
  // 19ms apart pairs; 21ms stays unmatched.
  std::vector<double> a{0.000, 1.000, 2.000};
  std::vector<double> b{0.019, 1.021, 1.999};
  auto pairs = associate_timestamps(a, b, 0.02);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].first == 0);
  CHECK(pairs[0].second == 0);
  CHECK(pairs[1].first == 2);
  CHECK(pairs[1].second == 2);

  // Greedy smallest-gap first: the middle b entry could pair with either a,
  // but the closer one wins and each entry is used at most once.
  std::vector<double> a2{0.0, 0.010};
  std::vector<double> b2{0.008};
  auto p2 = associate_timestamps(a2, b2, 0.02);
  REQUIRE(p2.size() == 1);
  CHECK(p2[0].first == 1);  // |0.010 - 0.008| < |0.0 - 0.008|
  CHECK(p2[0].second == 0);

  // Symmetry: swapping the lists mirrors the pairing.
  auto fwd = associate_timestamps(a, b, 0.02);
  auto rev = associate_timestamps(b, a, 0.02);
  REQUIRE(fwd.size() == rev.size());
  for (size_t i = 0; i < fwd.size(); ++i) {
    bool found = false;
    for (auto& r : rev)
      if (r.first == fwd[i].second && r.second == fwd[i].first) found = true;
    CHECK(found);
  }
}

TEST_CASE("tum sequence: written layout loads back with metric depth") {
  // Emit a miniature sequence in the TUM directory layout and reload it.
  fs::path dir = scratch() / "mini_tum";
  fs::create_directories(dir / "rgb");
  fs::create_directories(dir / "depth");

  SyntheticScene scene = make_scene("plane");
  Intrinsics K = scene.K;
  std::ofstream rgb_idx(dir / "rgb.txt");
  std::ofstream depth_idx(dir / "depth.txt");
  rgb_idx << "# color images\n# file: mini\n# timestamp filename\n";
  depth_idx << "# depth images\n";
  const double scale = 5000.0;
  for (int i = 0; i < 3; ++i) {
    Frame f = render_synthetic(scene, scene.trajectory[0], K, 0.0, 0.0, 0,
                               100.0 + i / 30.0);
    char name[32];
    std::snprintf(name, sizeof(name), "%06d.png", i);
    write_png_color((dir / "rgb" / name).string(), f.color);
    Image<uint16_t> counts(K.width, K.height);
    for (int r = 0; r < K.height; ++r)
      for (int c = 0; c < K.width; ++c) {
        double d = f.depth.at(c, r) * scale;
        counts.at(c, r) = static_cast<uint16_t>(
            std::min(65535.0, std::max(0.0, std::round(d))));
      }
    write_png_gray16((dir / "depth" / name).string(), counts);
    char ts[32];
    std::snprintf(ts, sizeof(ts), "%.6f", 100.0 + i / 30.0);
    rgb_idx << ts << " rgb/" << name << "\n";
    depth_idx << ts << " depth/" << name << "\n";
  }
  rgb_idx.close();
  depth_idx.close();
  write_trajectory_tum((dir / "groundtruth.txt").string(),
                       {{100.0, scene.trajectory[0]}});

  TumSequence seq = load_tum(dir.string());
  REQUIRE(seq.size() == 3);
  CHECK(seq.dropped == 0);
  CHECK(seq.groundtruth.size() == 1);

  Frame f0 = seq.load_frame(0, K);
  Frame ref = render_synthetic(scene, scene.trajectory[0], K);
  CHECK(f0.timestamp == doctest::Approx(100.0));
  // Depth decodes through the 5000 counts/meter convention.
  int checked = 0;
  for (int r = 0; r < K.height; r += 7)
    for (int c = 0; c < K.width; c += 7) {
      if (ref.depth.at(c, r) <= 0) continue;
      CHECK(f0.depth.at(c, r) ==
            doctest::Approx(ref.depth.at(c, r)).epsilon(2e-4));
      ++checked;
    }
  CHECK(checked > 50);
  // Normals were derived on load.
  CHECK(f0.normal.width() == K.width);

  // A depth entry with no rgb partner is dropped and counted.
  {
    std::ofstream extra(dir / "depth.txt", std::ios::app);
    extra << "999.000000 depth/000000.png\n";
  }
  TumSequence seq2 = load_tum(dir.string());
  CHECK(seq2.size() == 3);
  CHECK(seq2.dropped == 1);

  CHECK_THROWS(load_tum((scratch() / "nonexistent").string()));
}
