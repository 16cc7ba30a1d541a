#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>

#include "sslam/backward.hpp"
#include "sslam/config.hpp"
#include "sslam/geometry.hpp"
#include "sslam/mapping.hpp"
#include "sslam/pipeline.hpp"
#include "sslam/ply.hpp"
#include "sslam/rasterizer.hpp"
#include "sslam/synthetic.hpp"
#include "sslam/tracking.hpp"

namespace py = pybind11;
using namespace sslam;

namespace {

// ---- numpy <-> image/pose conversions ------------------------------------

Eigen::Matrix4d pose_to_mat(const Pose& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.R;
  m.topRightCorner<3, 1>() = p.t;
  return m;
}

Pose mat_to_pose(const Eigen::Matrix4d& m) {
  Pose p;
  p.R = m.topLeftCorner<3, 3>();
  p.t = m.topRightCorner<3, 1>();
  return p;
}

Eigen::Matrix4d as_mat4(const py::array_t<double>& a) {
  auto buf = a.unchecked<2>();
  if (buf.shape(0) != 4 || buf.shape(1) != 4)
    throw std::invalid_argument("pose must be a 4x4 matrix");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = buf(r, c);
  return m;
}

Intrinsics as_intrinsics(const py::tuple& k) {
  if (k.size() != 6)
    throw std::invalid_argument("intrinsics must be (fx, fy, cx, cy, w, h)");
  return {k[0].cast<double>(), k[1].cast<double>(), k[2].cast<double>(),
          k[3].cast<double>(), k[4].cast<int>(),    k[5].cast<int>()};
}

py::array_t<double> gray_to_np(const GrayImage& img) {
  py::array_t<double> a({img.height(), img.width()});
  auto buf = a.mutable_unchecked<2>();
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) buf(r, c) = img.at(c, r);
  return a;
}

py::array_t<double> vec3_to_np(const Image<Eigen::Vector3d>& img) {
  py::array_t<double> a({img.height(), img.width(), 3});
  auto buf = a.mutable_unchecked<3>();
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      const Eigen::Vector3d& v = img.at(c, r);
      buf(r, c, 0) = v.x();
      buf(r, c, 1) = v.y();
      buf(r, c, 2) = v.z();
    }
  return a;
}

py::array_t<uint8_t> mask_to_np(const MaskImage& img) {
  py::array_t<uint8_t> a({img.height(), img.width()});
  auto buf = a.mutable_unchecked<2>();
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) buf(r, c) = img.at(c, r);
  return a;
}

py::array_t<int> int_to_np(const Image<int>& img) {
  py::array_t<int> a({img.height(), img.width()});
  auto buf = a.mutable_unchecked<2>();
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) buf(r, c) = img.at(c, r);
  return a;
}

GrayImage np_to_gray(const py::array_t<double>& a) {
  auto buf = a.unchecked<2>();
  GrayImage img(static_cast<int>(buf.shape(1)), static_cast<int>(buf.shape(0)));
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) img.at(c, r) = buf(r, c);
  return img;
}

Image<Eigen::Vector3d> np_to_vec3(const py::array_t<double>& a) {
  auto buf = a.unchecked<3>();
  if (buf.shape(2) != 3) throw std::invalid_argument("expected (h, w, 3) array");
  Image<Eigen::Vector3d> img(static_cast<int>(buf.shape(1)),
                             static_cast<int>(buf.shape(0)));
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      img.at(c, r) = Eigen::Vector3d(buf(r, c, 0), buf(r, c, 1), buf(r, c, 2));
  return img;
}

LossGrads np_to_grads(const py::array_t<double>& d_color,
                      const py::array_t<double>& d_depth,
                      const py::array_t<double>& d_normal) {
  LossGrads g;
  g.d_color = np_to_vec3(d_color);
  g.d_depth = np_to_gray(d_depth);
  g.d_normal = np_to_vec3(d_normal);
  return g;
}

/// Render output plus the exact configuration that produced it, so a
/// backward call replays the same traversal without re-specifying knobs.
struct RenderResult {
  RenderOutput out;
  RenderConfig cfg;
  Pose pose;
  Intrinsics K;
};

RenderConfig make_render_config(const std::string& depth_mode, double tau,
                                int threads) {
  RenderConfig rc;
  rc.depth_mode = parse_depth_mode(depth_mode);
  rc.tau = tau;
  rc.threads = threads;
  return rc;
}

Frame frame_from_np(const py::array_t<double>& color,
                    const py::array_t<double>& depth, const Intrinsics& K,
                    double timestamp) {
  return make_frame(timestamp, np_to_vec3(color), np_to_gray(depth), K);
}

}  // namespace

PYBIND11_MODULE(_sslam, m) {
  m.doc() = "2D Gaussian surfel SLAM core (differentiable splatting, "
            "tracking, mapping)";

  py::register_exception<TrackingError>(m, "TrackingError");

  m.def("exp_se3", [](const Vector6d& xi) { return pose_to_mat(exp_se3(xi)); },
        py::arg("xi"), "SE(3) exponential: 6-vector (rho, phi) to 4x4 pose");
  m.def("log_se3",
        [](const py::array_t<double>& T) -> Vector6d {
          return log_se3(mat_to_pose(as_mat4(T)));
        },
        py::arg("T"), "SE(3) logarithm: 4x4 pose to 6-vector");

  py::class_<SurfelMap>(m, "SurfelMap")
      .def(py::init<>())
      .def("__len__", [](const SurfelMap& s) { return s.size(); })
      .def("to_arrays",
           [](const SurfelMap& s) {
             py::dict d;
             size_t n = s.size();
             py::array_t<double> p({n, size_t(3)}), q({n, size_t(4)}),
                 log_s({n, size_t(2)}), la(n), color({n, size_t(3)});
             auto bp = p.mutable_unchecked<2>(), bq = q.mutable_unchecked<2>(),
                  bs = log_s.mutable_unchecked<2>(),
                  bc = color.mutable_unchecked<2>();
             auto bl = la.mutable_unchecked<1>();
             for (size_t i = 0; i < n; ++i) {
               const Surfel& sf = s[i];
               for (int k = 0; k < 3; ++k) bp(i, k) = sf.p[k];
               bq(i, 0) = sf.q.w();
               bq(i, 1) = sf.q.x();
               bq(i, 2) = sf.q.y();
               bq(i, 3) = sf.q.z();
               bs(i, 0) = sf.log_s.x();
               bs(i, 1) = sf.log_s.y();
               bl(i) = sf.logit_alpha;
               for (int k = 0; k < 3; ++k) bc(i, k) = sf.color[k];
             }
             d["p"] = p;
             d["q"] = q;  // (w, x, y, z)
             d["log_s"] = log_s;
             d["logit_alpha"] = la;
             d["color"] = color;
             return d;
           })
      .def_static("from_arrays",
                  [](const py::array_t<double>& p, const py::array_t<double>& q,
                     const py::array_t<double>& log_s,
                     const py::array_t<double>& logit_alpha,
                     const py::array_t<double>& color) {
                    auto bp = p.unchecked<2>(), bq = q.unchecked<2>(),
                         bs = log_s.unchecked<2>(), bc = color.unchecked<2>();
                    auto bl = logit_alpha.unchecked<1>();
                    size_t n = static_cast<size_t>(bp.shape(0));
                    if (static_cast<size_t>(bq.shape(0)) != n ||
                        static_cast<size_t>(bs.shape(0)) != n ||
                        static_cast<size_t>(bl.shape(0)) != n ||
                        static_cast<size_t>(bc.shape(0)) != n)
                      throw std::invalid_argument("array length mismatch");
                    SurfelMap map;
                    for (size_t i = 0; i < n; ++i) {
                      Surfel s;
                      s.p = Eigen::Vector3d(bp(i, 0), bp(i, 1), bp(i, 2));
                      s.q = Eigen::Quaterniond(bq(i, 0), bq(i, 1), bq(i, 2),
                                               bq(i, 3))
                                .normalized();
                      s.log_s = Eigen::Vector2d(bs(i, 0), bs(i, 1));
                      s.logit_alpha = bl(i);
                      s.color = Eigen::Vector3d(bc(i, 0), bc(i, 1), bc(i, 2));
                      map.add(s);
                    }
                    return map;
                  },
                  py::arg("p"), py::arg("q"), py::arg("log_s"),
                  py::arg("logit_alpha"), py::arg("color"),
                  "Build a map from arrays; q rows are (w, x, y, z)")
      .def("save_ply",
           [](const SurfelMap& s, const std::string& path) {
             write_ply_surfels(path, s);
           })
      .def_static("load_ply", [](const std::string& path) {
        return read_ply_surfels(path);
      });

  py::class_<RenderResult>(m, "RenderResult")
      .def_property_readonly(
          "color", [](const RenderResult& r) { return vec3_to_np(r.out.color); })
      .def_property_readonly(
          "depth", [](const RenderResult& r) { return gray_to_np(r.out.depth); })
      .def_property_readonly(
          "normal",
          [](const RenderResult& r) { return vec3_to_np(r.out.normal); })
      .def_property_readonly(
          "distortion",
          [](const RenderResult& r) { return gray_to_np(r.out.distortion); })
      .def_property_readonly(
          "transmittance",
          [](const RenderResult& r) { return gray_to_np(r.out.transmittance); })
      .def_property_readonly(
          "alpha_sum",
          [](const RenderResult& r) { return gray_to_np(r.out.alpha_sum); })
      .def_property_readonly(
          "valid", [](const RenderResult& r) { return mask_to_np(r.out.valid); })
      .def_property_readonly(
          "substituted",
          [](const RenderResult& r) { return mask_to_np(r.out.substituted); })
      .def_property_readonly(
          "dominant_id",
          [](const RenderResult& r) { return int_to_np(r.out.dominant_id); });

  m.def(
      "render",
      [](const SurfelMap& map, const py::array_t<double>& T, const py::tuple& K,
         const std::string& depth_mode, double tau, int threads) {
        RenderResult r;
        r.cfg = make_render_config(depth_mode, tau, threads);
        r.pose = mat_to_pose(as_mat4(T));
        r.K = as_intrinsics(K);
        r.out = render(map, r.pose, r.K, r.cfg);
        return r;
      },
      py::arg("map"), py::arg("T_wc"), py::arg("K"),
      py::arg("depth_mode") = "adaptive", py::arg("tau") = 5e-6,
      py::arg("threads") = 0,
      "Splat the map through world-to-camera pose T_wc; K = (fx, fy, cx, "
      "cy, w, h)");

  m.def(
      "backward_surfels",
      [](const SurfelMap& map, const RenderResult& r,
         const py::array_t<double>& d_color, const py::array_t<double>& d_depth,
         const py::array_t<double>& d_normal) {
        SurfelGrads g = backward_surfels(map, r.pose, r.K, r.out,
                                         np_to_grads(d_color, d_depth, d_normal),
                                         r.cfg);
        py::dict d;
        size_t n = g.p.size();
        py::array_t<double> p({n, size_t(3)}), q({n, size_t(4)}),
            log_s({n, size_t(2)}), la(n), color({n, size_t(3)});
        auto bp = p.mutable_unchecked<2>(), bq = q.mutable_unchecked<2>(),
             bs = log_s.mutable_unchecked<2>(), bc = color.mutable_unchecked<2>();
        auto bl = la.mutable_unchecked<1>();
        for (size_t i = 0; i < n; ++i) {
          for (int k = 0; k < 3; ++k) bp(i, k) = g.p[i][k];
          for (int k = 0; k < 4; ++k) bq(i, k) = g.q[i][k];
          bs(i, 0) = g.log_s[i].x();
          bs(i, 1) = g.log_s[i].y();
          bl(i) = g.logit_alpha[i];
          for (int k = 0; k < 3; ++k) bc(i, k) = g.color[i][k];
        }
        d["p"] = p;
        d["q"] = q;
        d["log_s"] = log_s;
        d["logit_alpha"] = la;
        d["color"] = color;
        return d;
      },
      py::arg("map"), py::arg("result"), py::arg("d_color"), py::arg("d_depth"),
      py::arg("d_normal"),
      "Per-surfel gradients of the rendered buffers under the given "
      "per-pixel adjoints");

  m.def(
      "backward_pose",
      [](const SurfelMap& map, const RenderResult& r,
         const py::array_t<double>& d_color, const py::array_t<double>& d_depth,
         const py::array_t<double>& d_normal, bool radial) -> Vector6d {
        return backward_pose(map, r.pose, r.K, r.out,
                             np_to_grads(d_color, d_depth, d_normal), r.cfg,
                             radial);
      },
      py::arg("map"), py::arg("result"), py::arg("d_color"), py::arg("d_depth"),
      py::arg("d_normal"), py::arg("radial") = true,
      "Camera-tangent gradient (rho, phi) of the rendered buffers");

  m.def(
      "mapping_loss",
      [](const RenderResult& r, const py::array_t<double>& color,
         const py::array_t<double>& depth, double gamma_d, double gamma_n) {
        MappingConfig mc;
        mc.gamma_d = gamma_d;
        mc.gamma_n = gamma_n;
        Frame f = frame_from_np(color, depth, r.K, 0.0);
        MappingLoss l = mapping_loss(r.out, f, mc);
        py::dict d;
        d["total"] = l.total;
        d["color"] = l.color;
        d["depth"] = l.depth;
        d["normal"] = l.normal;
        d["d_color"] = vec3_to_np(l.grads.d_color);
        d["d_depth"] = gray_to_np(l.grads.d_depth);
        d["d_normal"] = vec3_to_np(l.grads.d_normal);
        return d;
      },
      py::arg("result"), py::arg("color"), py::arg("depth"),
      py::arg("gamma_d") = 1.0, py::arg("gamma_n") = 0.1,
      "Photometric + depth + normal residual against an observed frame, "
      "with per-pixel adjoints");

  m.def(
      "track_frame",
      [](const SurfelMap& map, const py::array_t<double>& color,
         const py::array_t<double>& depth, const py::array_t<double>& T_init,
         const py::tuple& K, int iterations, bool radial,
         const std::string& depth_mode) {
        Intrinsics intr = as_intrinsics(K);
        Frame f = frame_from_np(color, depth, intr, 0.0);
        TrackingConfig tc;
        tc.iterations = iterations;
        tc.radial_enabled = radial;
        RenderConfig rc;
        rc.depth_mode = parse_depth_mode(depth_mode);
        TrackResult res =
            track_frame(map, f, mat_to_pose(as_mat4(T_init)), intr, tc, rc);
        return py::make_tuple(pose_to_mat(res.pose), res.loss);
      },
      py::arg("map"), py::arg("color"), py::arg("depth"), py::arg("T_init"),
      py::arg("K"), py::arg("iterations") = 50, py::arg("radial") = true,
      py::arg("depth_mode") = "adaptive",
      "Gradient-descent pose refinement against one frame; returns "
      "(T_wc, best loss)");

  m.def(
      "synthetic_frame",
      [](const std::string& scene_name, int index, double noise_sigma,
         double dropout, uint64_t seed) {
        SyntheticScene scene = make_scene(scene_name);
        if (index < 0 || static_cast<size_t>(index) >= scene.trajectory.size())
          throw std::out_of_range("view index out of range");
        Frame f = render_synthetic(scene, scene.trajectory[index], scene.K,
                                   noise_sigma, dropout, seed,
                                   index / scene.fps);
        py::dict d;
        d["color"] = vec3_to_np(f.color);
        d["depth"] = gray_to_np(f.depth);
        d["normal"] = vec3_to_np(f.normal);
        d["T_wc"] = pose_to_mat(scene.trajectory[index]);
        d["K"] = py::make_tuple(scene.K.fx, scene.K.fy, scene.K.cx, scene.K.cy,
                                scene.K.width, scene.K.height);
        d["n_views"] = scene.trajectory.size();
        d["timestamp"] = index / scene.fps;
        return d;
      },
      py::arg("scene"), py::arg("index") = 0, py::arg("noise_sigma") = 0.0,
      py::arg("dropout") = 0.0, py::arg("seed") = 0,
      "Ray-cast one view of a named synthetic scene "
      "(box50 | edge | basin | plane | tilt)");

  py::class_<SlamSystem>(m, "Slam")
      .def(py::init([](const py::tuple& K, const std::string& config_path) {
             FullConfig cfg;
             if (!config_path.empty()) cfg = load_config(config_path);
             return new SlamSystem(as_intrinsics(K), cfg.pipeline());
           }),
           py::arg("K"), py::arg("config_path") = "")
      .def("process_frame",
           [](SlamSystem& s, const py::array_t<double>& color,
              const py::array_t<double>& depth, double timestamp) {
             s.process_frame(
                 frame_from_np(color, depth, s.intrinsics(), timestamp));
           },
           py::arg("color"), py::arg("depth"), py::arg("timestamp") = 0.0)
      .def("finalize", &SlamSystem::finalize)
      .def_property_readonly("n_surfels",
                             [](const SlamSystem& s) { return s.map().size(); })
      .def_property_readonly(
          "n_keyframes",
          [](const SlamSystem& s) { return s.keyframes().size(); })
      .def("trajectory",
           [](const SlamSystem& s) {
             py::list out;
             for (const Pose& p : s.trajectory())
               out.append(py::cast(pose_to_mat(p)));
             return out;
           })
      .def("map", [](const SlamSystem& s) { return s.map(); })
      .def("export_pointcloud",
           [](const SlamSystem& s, int stride) {
             PointCloud pc = s.export_pointcloud(stride);
             size_t n = pc.size();
             py::array_t<double> pts({n, size_t(3)}), nrm({n, size_t(3)}),
                 col({n, size_t(3)});
             auto bp = pts.mutable_unchecked<2>(),
                  bn = nrm.mutable_unchecked<2>(),
                  bc = col.mutable_unchecked<2>();
             for (size_t i = 0; i < n; ++i)
               for (int k = 0; k < 3; ++k) {
                 bp(i, k) = pc.points[i][k];
                 bn(i, k) = pc.normals[i][k];
                 bc(i, k) = pc.colors[i][k];
               }
             py::dict d;
             d["points"] = pts;
             d["normals"] = nrm;
             d["colors"] = col;
             return d;
           },
           py::arg("stride") = 2);
}
