#include "sslam/trajectory_io.hpp"

#include <Eigen/Geometry>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sslam {

void write_trajectory_tum(const std::string& path,
                          const std::vector<TrajectoryEntry>& traj) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write trajectory: " + path);
  char line[256];
  auto nz = [](double v) { return v == 0.0 ? 0.0 : v; };  // no "-0" in files
  for (const TrajectoryEntry& e : traj) {
    Pose wc = e.pose.inverse();  // file convention is camera-to-world
    Eigen::Quaterniond q(wc.R);
    if (q.w() < 0) q.coeffs() = -q.coeffs();  // canonical hemisphere
    std::snprintf(line, sizeof(line),
                  "%.6f %.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", e.timestamp,
                  nz(wc.t.x()), nz(wc.t.y()), nz(wc.t.z()), nz(q.x()),
                  nz(q.y()), nz(q.z()), nz(q.w()));
    f << line;
  }
  if (!f) throw std::runtime_error("short write to trajectory: " + path);
}

std::vector<TrajectoryEntry> read_trajectory_tum(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trajectory: " + path);
  std::vector<TrajectoryEntry> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double ts, tx, ty, tz, qx, qy, qz, qw;
    if (!(ss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw std::runtime_error("malformed trajectory line in " + path + ": " +
                               line);
    Eigen::Quaterniond q(qw, qx, qy, qz);
    if (q.norm() < 1e-9)
      throw std::runtime_error("zero quaternion in " + path);
    Pose wc;
    wc.R = q.normalized().toRotationMatrix();
    wc.t = Eigen::Vector3d(tx, ty, tz);
    out.push_back({ts, wc.inverse()});
  }
  return out;
}

}  // namespace sslam
