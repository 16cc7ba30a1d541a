#include <CLI11.hpp>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "sslam/basin.hpp"
#include "sslam/config.hpp"
#include "sslam/evaluation.hpp"
#include "sslam/image_io.hpp"
#include "sslam/pipeline.hpp"
#include "sslam/ply.hpp"
#include "sslam/png_io.hpp"
#include "sslam/synthetic.hpp"
#include "sslam/trajectory_io.hpp"
#include "sslam/tum.hpp"

namespace fs = std::filesystem;
using namespace sslam;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitTracking = 3;

struct Dataset {
  Intrinsics K;
  size_t count = 0;
  std::function<Frame(size_t)> frame;
  std::vector<TrajectoryEntry> groundtruth;
};

Dataset open_dataset(const FullConfig& cfg) {
  Dataset ds;
  const std::string& src = cfg.dataset.source;
  if (src.rfind("synthetic:", 0) == 0) {
    SyntheticScene scene = make_scene(src.substr(10));
    ds.K = scene.K;
    ds.count = scene.trajectory.size();
    for (size_t i = 0; i < ds.count; ++i)
      ds.groundtruth.push_back(
          {static_cast<double>(i) / scene.fps, scene.trajectory[i]});
    double sigma = cfg.dataset.noise_sigma, dropout = cfg.dataset.dropout;
    uint64_t seed = cfg.dataset.seed;
    ds.frame = [scene, sigma, dropout, seed](size_t i) {
      return render_synthetic(scene, scene.trajectory[i], scene.K, sigma,
                              dropout, seed + i,
                              static_cast<double>(i) / scene.fps);
    };
    return ds;
  }
  if (!fs::is_directory(src))
    throw std::runtime_error("dataset not found (expected a directory or "
                             "synthetic:<name>): " + src);
  TumSequence seq = load_tum(src);
  seq.depth_scale = cfg.dataset.depth_scale;
  if (seq.dropped > 0)
    std::cout << "association dropped " << seq.dropped
              << " unmatched index entries\n";
  ds.K = cfg.intrinsics();
  ds.count = seq.size();
  ds.groundtruth = seq.groundtruth;
  Intrinsics K = ds.K;
  ds.frame = [seq{std::move(seq)}, K](size_t i) { return seq.load_frame(i, K); };
  return ds;
}

std::vector<TrajectoryEntry> estimated_trajectory(const SlamSystem& slam) {
  std::vector<TrajectoryEntry> est;
  for (size_t i = 0; i < slam.trajectory().size(); ++i)
    est.push_back({slam.timestamps()[i], slam.trajectory()[i]});
  return est;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<std::string, double>>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "metric,value\n";
  for (const auto& [k, v] : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    f << k << ',' << buf << '\n';
  }
}

int cmd_run(const FullConfig& cfg) {
  fs::create_directories(cfg.output.dir);
  save_config(cfg, (fs::path(cfg.output.dir) / "config.json").string());

  Dataset ds = open_dataset(cfg);
  size_t n = ds.count;
  if (cfg.dataset.max_frames >= 0)
    n = std::min(n, static_cast<size_t>(cfg.dataset.max_frames));
  if (n == 0) throw std::runtime_error("dataset has no frames: " + cfg.dataset.source);
  std::cout << "dataset " << cfg.dataset.source << ": " << n << " frames, "
            << ds.K.width << "x" << ds.K.height << "\n";

  SlamSystem slam(ds.K, cfg.pipeline());
  for (size_t i = 0; i < n; ++i) {
    slam.process_frame(ds.frame(i));
    if ((i + 1) % 10 == 0 || i + 1 == n)
      std::cout << "processed " << i + 1 << "/" << n << " frames, "
                << slam.map().size() << " surfels, "
                << slam.keyframes().size() << " keyframes\n";
  }
  slam.finalize();

  fs::path out(cfg.output.dir);
  std::vector<TrajectoryEntry> est = estimated_trajectory(slam);
  write_trajectory_tum((out / "trajectory.txt").string(), est);
  write_ply_surfels((out / "map.ply").string(), slam.map());
  write_ply_points((out / "pointcloud.ply").string(),
                   slam.export_pointcloud(cfg.output.pointcloud_stride));
  append_loss_trace((out / "mapping_trace.csv").string(), slam.mapping_trace());
  {
    // regroup the flat (frame, row) trace into per-frame chunks
    std::vector<TrackTraceRow> chunk;
    int chunk_id = -1;
    auto flush = [&] {
      if (!chunk.empty())
        append_track_trace((out / "tracking_trace.csv").string(), chunk_id,
                           chunk);
      chunk.clear();
    };
    for (const auto& [fid, row] : slam.track_trace()) {
      if (fid != chunk_id) flush(), chunk_id = fid;
      chunk.push_back(row);
    }
    flush();
  }

  std::vector<std::pair<std::string, double>> metrics = {
      {"frames", static_cast<double>(slam.frames_processed())},
      {"keyframes", static_cast<double>(slam.keyframes().size())},
      {"surfels", static_cast<double>(slam.map().size())},
  };
  if (ds.groundtruth.size() >= 3 && est.size() >= 3) {
    AteResult a = ate(est, ds.groundtruth, AlignMode::Rigid);
    metrics.insert(metrics.end(), {{"ate_rmse_cm", a.rmse * 100.0},
                                   {"ate_mean_cm", a.mean * 100.0},
                                   {"ate_median_cm", a.median * 100.0},
                                   {"ate_max_cm", a.max * 100.0},
                                   {"ate_pairs", static_cast<double>(a.pairs)}});
    std::printf("ATE rmse %.3f cm over %d pairs\n", a.rmse * 100.0, a.pairs);
  }
  write_metrics_csv((out / "metrics.csv").string(), metrics);
  std::cout << "wrote " << (out / "trajectory.txt").string() << ", map.ply, "
            << "pointcloud.ply, metrics.csv\n";
  return 0;
}

int cmd_eval_ate(const std::string& est_path, const std::string& gt_path,
                 const std::string& mode, double max_gap,
                 const std::string& csv) {
  auto est = read_trajectory_tum(est_path);
  auto gt = read_trajectory_tum(gt_path);
  AteResult a = ate(est, gt,
                    mode == "similarity" ? AlignMode::Similarity
                                         : AlignMode::Rigid,
                    max_gap);
  std::printf("pairs  %d\n", a.pairs);
  std::printf("rmse   %.3f cm\n", a.rmse * 100.0);
  std::printf("mean   %.3f cm\n", a.mean * 100.0);
  std::printf("median %.3f cm\n", a.median * 100.0);
  std::printf("max    %.3f cm\n", a.max * 100.0);
  if (!csv.empty())
    write_metrics_csv(csv, {{"ate_rmse_cm", a.rmse * 100.0},
                            {"ate_mean_cm", a.mean * 100.0},
                            {"ate_median_cm", a.median * 100.0},
                            {"ate_max_cm", a.max * 100.0},
                            {"ate_pairs", static_cast<double>(a.pairs)}});
  return 0;
}

int cmd_eval_geom(const std::string& pred_path, const std::string& gt_path,
                  double thresh, const std::string& csv) {
  PointCloud pred = read_ply_points(pred_path);
  PointCloud gt = read_ply_points(gt_path);
  GeomResult g = geom_metrics(pred.points, gt.points, thresh);
  std::printf("accuracy   %.3f cm\n", g.accuracy_cm);
  std::printf("completion %.3f cm\n", g.completion_cm);
  std::printf("precision  %.1f %%\n", g.precision);
  std::printf("recall     %.1f %%\n", g.recall);
  std::printf("F1         %.1f %%\n", g.f1);
  if (!csv.empty())
    write_metrics_csv(csv, {{"accuracy_cm", g.accuracy_cm},
                            {"completion_cm", g.completion_cm},
                            {"precision", g.precision},
                            {"recall", g.recall},
                            {"f1", g.f1}});
  return 0;
}

int cmd_basin(const FullConfig& cfg, const std::string& scene_name) {
  fs::create_directories(cfg.output.dir);
  SyntheticScene scene = make_scene(scene_name);
  std::vector<Frame> frames;
  for (size_t i = 0; i < scene.trajectory.size(); ++i)
    frames.push_back(render_synthetic(scene, scene.trajectory[i], scene.K, 0.0,
                                      0.0, 0,
                                      static_cast<double>(i) / scene.fps));
  std::cout << "training map from " << frames.size() << " grid views\n";
  SurfelMap map = train_basin_map(scene, frames, cfg.basin, cfg.mapping,
                                  cfg.management, cfg.render);
  std::cout << "trained map: " << map.size() << " surfels; sweeping "
            << cfg.basin.radii.size() << " radii x "
            << cfg.basin.trials_per_radius << " trials x 2 variants\n";
  size_t tv = static_cast<size_t>(
      std::clamp<int>(cfg.basin.target_view, 0,
                      static_cast<int>(frames.size()) - 1));
  std::vector<BasinRow> rows =
      basin_sweep(map, scene, frames[tv], cfg.basin, cfg.tracking, cfg.render);
  write_basin_csv((fs::path(cfg.output.dir) / "basin.csv").string(), rows);

  bool ordered = true;
  std::printf("%8s %8s %12s %13s\n", "radius", "trials", "radial_on",
              "radial_off");
  for (const BasinRow& r : rows) {
    std::printf("%8.2f %8d %12.2f %13.2f\n", r.radius, r.trials,
                r.rate_radial_on, r.rate_radial_off);
    if (r.success_radial_on < r.success_radial_off) ordered = false;
  }
  std::cout << (ordered ? "PASS" : "FAIL")
            << ": radial-on success >= radial-off at every radius\n";
  return ordered ? 0 : 1;
}

int cmd_render_debug(const std::string& map_path,
                     const std::vector<double>& pose7,
                     const std::vector<double>& intr,
                     const std::string& mode, const std::string& out_dir) {
  SurfelMap map = read_ply_surfels(map_path);
  // pose arrives in trajectory-line order (camera-to-world); invert it.
  Eigen::Quaterniond q(pose7[6], pose7[3], pose7[4], pose7[5]);
  if (q.norm() < 1e-12) throw std::runtime_error("pose quaternion is zero");
  q.normalize();
  Pose wc;
  wc.R = q.toRotationMatrix();
  wc.t = Eigen::Vector3d(pose7[0], pose7[1], pose7[2]);
  Pose pose = wc.inverse();

  Intrinsics K{intr[0], intr[1], intr[2], intr[3], static_cast<int>(intr[4]),
               static_cast<int>(intr[5])};
  RenderConfig rc;
  rc.depth_mode = parse_depth_mode(mode);
  RenderOutput ro = render(map, pose, K, rc);

  fs::create_directories(out_dir);
  fs::path out(out_dir);
  write_ppm((out / "color.ppm").string(), ro.color);
  write_pgm16((out / "depth.pgm").string(), ro.depth, 5000.0);
  ColorImage nvis(ro.width, ro.height);
  for (int r = 0; r < ro.height; ++r)
    for (int c = 0; c < ro.width; ++c) {
      Eigen::Vector3d n = ro.normal.at(c, r);
      double len = n.norm();
      nvis.at(c, r) = len > 1e-12
                          ? Eigen::Vector3d(0.5 * (n / len).array() + 0.5)
                          : Eigen::Vector3d::Zero();
    }
  write_ppm((out / "normal.ppm").string(), nvis);
  write_pgm16((out / "transmittance.pgm").string(), ro.transmittance, 65535.0);
  std::cout << "rendered " << map.size() << " surfels to " << out_dir
            << " (color.ppm, depth.pgm, normal.ppm, transmittance.pgm)\n";
  return 0;
}

int cmd_make_synthetic(const std::string& scene_name, const std::string& out_dir,
                       double sigma, double dropout, uint64_t seed) {
  SyntheticScene scene = make_scene(scene_name);
  fs::path out(out_dir);
  fs::create_directories(out / "rgb");
  fs::create_directories(out / "depth");

  std::ofstream rgb_idx(out / "rgb.txt"), depth_idx(out / "depth.txt");
  if (!rgb_idx || !depth_idx)
    throw std::runtime_error("cannot write index files in " + out_dir);
  rgb_idx << "# color images\n# timestamp filename\n";
  depth_idx << "# depth images\n# timestamp filename\n";

  std::vector<TrajectoryEntry> gt;
  for (size_t i = 0; i < scene.trajectory.size(); ++i) {
    double ts = static_cast<double>(i) / scene.fps;
    Frame f = render_synthetic(scene, scene.trajectory[i], scene.K, sigma,
                               dropout, seed + i, ts);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", i);
    write_png_color((out / "rgb" / name).string(), f.color);
    Image<uint16_t> d16(f.width(), f.height());
    for (int r = 0; r < f.height(); ++r)
      for (int c = 0; c < f.width(); ++c) {
        double counts = std::round(f.depth.at(c, r) * 5000.0);
        d16.at(c, r) = static_cast<uint16_t>(
            std::clamp(counts, 0.0, 65535.0));
      }
    write_png_gray16((out / "depth" / name).string(), d16);
    char ts_str[32];
    std::snprintf(ts_str, sizeof(ts_str), "%.6f", ts);
    rgb_idx << ts_str << " rgb/" << name << '\n';
    depth_idx << ts_str << " depth/" << name << '\n';
    gt.push_back({ts, scene.trajectory[i]});
  }
  write_trajectory_tum((out / "groundtruth.txt").string(), gt);

  FullConfig cfg;
  cfg.dataset.source = out_dir;
  cfg.dataset.fx = scene.K.fx;
  cfg.dataset.fy = scene.K.fy;
  cfg.dataset.cx = scene.K.cx;
  cfg.dataset.cy = scene.K.cy;
  cfg.dataset.width = scene.K.width;
  cfg.dataset.height = scene.K.height;
  cfg.output.dir = (out / "out").string();
  save_config(cfg, (out / "config.json").string());
  std::cout << "wrote " << scene.trajectory.size() << " frames to " << out_dir
            << " (TUM layout; intrinsics echoed in config.json)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surfel-splatting RGB-D SLAM: run, evaluate, debug"};
  app.require_subcommand(1);

  std::string config_path, dataset, out_dir, tracker_str, mode_str, scene_name;
  bool no_radial = false;
  int threads = -1, max_frames = -2, trials = -1, steps = -1;
  double noise_sigma = -1.0, dropout = -1.0;
  long long seed = -1;
  std::vector<double> radii;

  CLI::App* run = app.add_subcommand("run", "track + map a dataset");
  run->add_option("--dataset", dataset,
                  "TUM-layout directory or synthetic:<name>");
  auto* run_cfg = run->add_option("--config", config_path, "JSON config file");
  auto* run_out = run->add_option("--out", out_dir, "output directory");
  auto* run_tracker =
      run->add_option("--tracker", tracker_str, "coupled|icp");
  auto* run_mode =
      run->add_option("--depth-mode", mode_str, "mean|median|adaptive");
  auto* run_noradial = run->add_flag(
      "--no-radial", no_radial, "disable the radial pose-gradient component");
  auto* run_threads = run->add_option("--threads", threads, "worker threads (0 = all cores)");
  auto* run_maxf = run->add_option("--max-frames", max_frames, "frame cap (-1 = all)");
  auto* run_sigma = run->add_option("--noise-sigma", noise_sigma,
                                    "synthetic depth noise sigma (m)");
  auto* run_drop = run->add_option("--dropout", dropout,
                                   "synthetic invalid-depth fraction");
  auto* run_seed = run->add_option("--seed", seed, "synthetic noise seed");

  std::string est_path, gt_path, csv_path, align_mode = "rigid";
  double max_gap = 0.02;
  CLI::App* eat = app.add_subcommand("eval-ate", "trajectory error vs ground truth");
  eat->add_option("--est", est_path, "estimated trajectory (TUM text)")->required();
  eat->add_option("--gt", gt_path, "ground-truth trajectory")->required();
  eat->add_option("--mode", align_mode, "rigid|similarity");
  eat->add_option("--max-gap", max_gap, "association gap (s)");
  eat->add_option("--csv", csv_path, "also write metrics CSV");

  std::string pred_path;
  double thresh = 0.03;
  CLI::App* geo = app.add_subcommand("eval-geom", "point-cloud accuracy/completion/F1");
  geo->add_option("--pred", pred_path, "predicted point cloud (PLY)")->required();
  geo->add_option("--gt", gt_path, "ground-truth point cloud (PLY)")->required();
  geo->add_option("--thresh", thresh, "inlier threshold (m)");
  geo->add_option("--csv", csv_path, "also write metrics CSV");

  CLI::App* bas = app.add_subcommand(
      "basin", "convergence-basin sweep, radial gradient on vs off");
  bas->add_option("--scene", scene_name, "synthetic scene name")
      ->default_val("basin");
  auto* bas_cfg = bas->add_option("--config", config_path, "JSON config file");
  auto* bas_out = bas->add_option("--out", out_dir, "output directory");
  auto* bas_trials = bas->add_option("--trials", trials, "trials per radius");
  auto* bas_steps = bas->add_option("--steps", steps, "optimization steps per trial");
  auto* bas_radii = bas->add_option("--radii", radii, "displacement radii (m)");
  auto* bas_threads = bas->add_option("--threads", threads, "worker threads");

  std::string map_path;
  std::vector<double> pose7{0, 0, 0, 0, 0, 0, 1};
  std::vector<double> intr{525.0, 525.0, 319.5, 239.5, 640, 480};
  std::string rd_out = ".", rd_mode = "adaptive";
  CLI::App* rdb = app.add_subcommand("render-debug", "render a surfel PLY to image dumps");
  rdb->add_option("--map", map_path, "surfel map (PLY)")->required();
  rdb->add_option("--pose", pose7,
                  "camera-to-world tx ty tz qx qy qz qw")
      ->expected(7);
  rdb->add_option("--intrinsics", intr, "fx fy cx cy width height")->expected(6);
  rdb->add_option("--depth-mode", rd_mode, "mean|median|adaptive");
  rdb->add_option("--out", rd_out, "output directory");

  std::string ms_out;
  CLI::App* msy = app.add_subcommand("make-synthetic",
                                     "write a synthetic scene as a TUM-layout dataset");
  msy->add_option("--scene", scene_name, "synthetic scene name")->required();
  msy->add_option("--out", ms_out, "output directory")->required();
  msy->add_option("--noise-sigma", noise_sigma, "depth noise sigma (m)")
      ->default_val(0.0);
  msy->add_option("--dropout", dropout, "invalid-depth fraction")
      ->default_val(0.0);
  msy->add_option("--seed", seed, "noise seed")->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (run->parsed() || bas->parsed()) {
      FullConfig cfg;
      if (*run_cfg || *bas_cfg) cfg = load_config(config_path);
      apply_env_overrides(cfg);
      if (!dataset.empty()) cfg.dataset.source = dataset;
      if (*run_out || *bas_out) cfg.output.dir = out_dir;
      if (*run_tracker) cfg.tracking.tracker = parse_tracker(tracker_str);
      if (*run_mode) cfg.render.depth_mode = parse_depth_mode(mode_str);
      if (*run_noradial && no_radial) cfg.tracking.radial_enabled = false;
      if (*run_threads || *bas_threads) {
        cfg.render.threads = threads;
        cfg.basin.threads = threads;
      }
      if (*run_maxf) cfg.dataset.max_frames = max_frames;
      if (*run_sigma) cfg.dataset.noise_sigma = noise_sigma;
      if (*run_drop) cfg.dataset.dropout = dropout;
      if (*run_seed) cfg.dataset.seed = static_cast<uint64_t>(seed);
      if (*bas_trials) cfg.basin.trials_per_radius = trials;
      if (*bas_steps) cfg.basin.steps = steps;
      if (*bas_radii) cfg.basin.radii = radii;

      if (run->parsed()) {
        if (cfg.dataset.source.empty())
          throw CLI::RequiredError("--dataset (or dataset.source in the config)");
        return cmd_run(cfg);
      }
      return cmd_basin(cfg, scene_name);
    }
    if (eat->parsed())
      return cmd_eval_ate(est_path, gt_path, align_mode, max_gap, csv_path);
    if (geo->parsed()) return cmd_eval_geom(pred_path, gt_path, thresh, csv_path);
    if (rdb->parsed())
      return cmd_render_debug(map_path, pose7, intr, rd_mode, rd_out);
    if (msy->parsed())
      return cmd_make_synthetic(scene_name, ms_out, noise_sigma, dropout,
                                static_cast<uint64_t>(seed));
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TrackingError& e) {
    std::cerr << "tracking failure: " << e.what() << "\n";
    return kExitTracking;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
