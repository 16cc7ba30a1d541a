#include "sslam/tum.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sslam/png_io.hpp"

namespace sslam {

namespace {

std::vector<TumRecord> read_index(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("missing TUM index file: " + path);
  std::vector<TumRecord> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TumRecord rec;
    if (!(ss >> rec.timestamp >> rec.path))
      throw std::runtime_error("malformed line in " + path + ": " + line);
    out.push_back(rec);
  }
  std::sort(out.begin(), out.end(),
            [](const TumRecord& a, const TumRecord& b) {
              return a.timestamp < b.timestamp;
            });
  return out;
}

}  // namespace

std::vector<std::pair<size_t, size_t>> associate_timestamps(
    const std::vector<double>& a, const std::vector<double>& b,
    double max_gap) {
  struct Cand {
    double diff;
    size_t i, j;
  };
  std::vector<Cand> cands;
  // Candidate window: for each a, b entries within the gap. Both lists are
  // typically sorted but this does not assume it.
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) {
      double d = std::abs(a[i] - b[j]);
      if (d <= max_gap) cands.push_back({d, i, j});
    }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.diff != y.diff) return x.diff < y.diff;
    if (x.i != y.i) return x.i < y.i;
    return x.j < y.j;
  });
  std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
  std::vector<std::pair<size_t, size_t>> pairs;
  for (const Cand& c : cands) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = 1;
    pairs.push_back({c.i, c.j});
  }
  std::sort(pairs.begin(), pairs.end(),
            [&](const std::pair<size_t, size_t>& x,
                const std::pair<size_t, size_t>& y) {
              return a[x.first] < a[y.first];
            });
  return pairs;
}

TumSequence load_tum(const std::string& dir) {
  TumSequence seq;
  seq.dir = dir;
  std::vector<TumRecord> rgb = read_index(dir + "/rgb.txt");
  std::vector<TumRecord> depth = read_index(dir + "/depth.txt");

  std::vector<double> t_rgb, t_depth;
  for (const TumRecord& r : rgb) t_rgb.push_back(r.timestamp);
  for (const TumRecord& r : depth) t_depth.push_back(r.timestamp);
  auto matches = associate_timestamps(t_rgb, t_depth);
  for (auto [i, j] : matches) seq.pairs.push_back({rgb[i], depth[j]});
  seq.dropped = static_cast<int>(rgb.size() + depth.size() - 2 * matches.size());

  std::string gt_path = dir + "/groundtruth.txt";
  if (std::filesystem::exists(gt_path))
    seq.groundtruth = read_trajectory_tum(gt_path);
  return seq;
}

Frame TumSequence::load_frame(size_t i, const Intrinsics& K) const {
  if (i >= pairs.size())
    throw std::out_of_range("TUM frame index out of range");
  const auto& [rgb, depth] = pairs[i];
  ColorImage color = read_png_color(dir + "/" + rgb.path);
  Image<uint16_t> raw = read_png_gray16(dir + "/" + depth.path);
  if (color.width() != raw.width() || color.height() != raw.height())
    throw std::runtime_error("TUM rgb/depth resolution mismatch at " +
                             rgb.path);
  if (color.width() != K.width || color.height() != K.height)
    throw std::runtime_error("TUM frame does not match intrinsics: " +
                             rgb.path);
  GrayImage d(raw.width(), raw.height());
  for (int y = 0; y < raw.height(); ++y)
    for (int x = 0; x < raw.width(); ++x)
      d.at(x, y) = raw.at(x, y) / depth_scale;
  return make_frame(rgb.timestamp, std::move(color), std::move(d), K);
}

Intrinsics tum_default_intrinsics() {
  return Intrinsics{525.0, 525.0, 319.5, 239.5, 640, 480};
}

}  // namespace sslam
