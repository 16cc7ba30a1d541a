#include "sslam/ply.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace sslam {

namespace {

void put_f32(std::string& buf, double v) {
  float f = static_cast<float>(v);
  char b[4];
  std::memcpy(b, &f, 4);
  buf.append(b, 4);
}

void put_u8(std::string& buf, double v01) {
  double v = std::min(std::max(v01, 0.0), 1.0);
  buf.push_back(static_cast<char>(std::lround(v * 255.0)));
}

struct PlyProperty {
  std::string name;
  std::string type;
  size_t size = 0;
  size_t offset = 0;
};

struct PlyVertexLayout {
  size_t count = 0;
  size_t stride = 0;
  std::vector<PlyProperty> props;

  const PlyProperty* find(const std::string& name) const {
    for (const PlyProperty& p : props)
      if (p.name == name) return &p;
    return nullptr;
  }
};

size_t ply_type_size(const std::string& t) {
  if (t == "char" || t == "int8" || t == "uchar" || t == "uint8") return 1;
  if (t == "short" || t == "int16" || t == "ushort" || t == "uint16") return 2;
  if (t == "int" || t == "int32" || t == "uint" || t == "uint32" ||
      t == "float" || t == "float32")
    return 4;
  if (t == "double" || t == "float64") return 8;
  return 0;
}

double decode_prop(const char* rec, const PlyProperty& p) {
  const char* src = rec + p.offset;
  auto load = [&](auto v) {
    std::memcpy(&v, src, sizeof(v));
    return static_cast<double>(v);
  };
  if (p.type == "float" || p.type == "float32") return load(float{});
  if (p.type == "double" || p.type == "float64") return load(double{});
  if (p.type == "uchar" || p.type == "uint8") return load(uint8_t{});
  if (p.type == "char" || p.type == "int8") return load(int8_t{});
  if (p.type == "short" || p.type == "int16") return load(int16_t{});
  if (p.type == "ushort" || p.type == "uint16") return load(uint16_t{});
  if (p.type == "int" || p.type == "int32") return load(int32_t{});
  if (p.type == "uint" || p.type == "uint32") return load(uint32_t{});
  throw std::runtime_error("unsupported PLY property type: " + p.type);
}

// Parses the header of a binary little-endian PLY whose first element is
// vertex; leaves the stream at the start of the vertex records.
PlyVertexLayout read_ply_header(std::ifstream& f, const std::string& path) {
  std::string line;
  if (!std::getline(f, line) || line.substr(0, 3) != "ply")
    throw std::runtime_error("not a PLY file: " + path);
  PlyVertexLayout layout;
  bool in_vertex = false, format_ok = false;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "comment" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "binary_little_endian")
        throw std::runtime_error("only binary little-endian PLY supported: " +
                                 path);
      format_ok = true;
    } else if (tok == "element") {
      std::string name;
      size_t count;
      ss >> name >> count;
      if (name == "vertex" && layout.props.empty()) {
        layout.count = count;
        in_vertex = true;
      } else {
        in_vertex = false;
        if (layout.props.empty())
          throw std::runtime_error("first PLY element must be vertex: " + path);
      }
    } else if (tok == "property") {
      if (!in_vertex) continue;  // trailing elements are ignored entirely
      std::string type, name;
      ss >> type;
      if (type == "list")
        throw std::runtime_error("list properties unsupported: " + path);
      ss >> name;
      size_t size = ply_type_size(type);
      if (size == 0)
        throw std::runtime_error("unknown PLY type " + type + " in " + path);
      layout.props.push_back({name, type, size, layout.stride});
      layout.stride += size;
    } else if (tok == "end_header") {
      if (!format_ok || layout.props.empty())
        throw std::runtime_error("incomplete PLY header: " + path);
      return layout;
    }
  }
  throw std::runtime_error("unterminated PLY header: " + path);
}

std::vector<char> read_ply_records(std::ifstream& f,
                                   const PlyVertexLayout& layout,
                                   const std::string& path) {
  std::vector<char> data(layout.count * layout.stride);
  f.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (static_cast<size_t>(f.gcount()) != data.size())
    throw std::runtime_error("truncated PLY payload: " + path);
  return data;
}

}  // namespace

void write_ply_points(const std::string& path, const PointCloud& pc) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write PLY: " + path);
  f << "ply\nformat binary_little_endian 1.0\nelement vertex " << pc.size()
    << "\nproperty float x\nproperty float y\nproperty float z\n"
       "property float nx\nproperty float ny\nproperty float nz\n"
       "property uchar red\nproperty uchar green\nproperty uchar blue\n"
       "end_header\n";
  std::string buf;
  buf.reserve(pc.size() * 27);
  for (size_t i = 0; i < pc.size(); ++i) {
    const Eigen::Vector3d& p = pc.points[i];
    Eigen::Vector3d n =
        i < pc.normals.size() ? pc.normals[i] : Eigen::Vector3d::Zero();
    Eigen::Vector3d c =
        i < pc.colors.size() ? pc.colors[i] : Eigen::Vector3d::Ones();
    for (int k = 0; k < 3; ++k) put_f32(buf, p[k]);
    for (int k = 0; k < 3; ++k) put_f32(buf, n[k]);
    for (int k = 0; k < 3; ++k) put_u8(buf, c[k]);
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("short write to PLY: " + path);
}

PointCloud read_ply_points(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open PLY: " + path);
  PlyVertexLayout layout = read_ply_header(f, path);
  std::vector<char> data = read_ply_records(f, layout, path);

  const PlyProperty* x = layout.find("x");
  const PlyProperty* y = layout.find("y");
  const PlyProperty* z = layout.find("z");
  if (!x || !y || !z)
    throw std::runtime_error("PLY lacks x/y/z properties: " + path);
  const PlyProperty* nx = layout.find("nx");
  const PlyProperty* ny = layout.find("ny");
  const PlyProperty* nz = layout.find("nz");
  const PlyProperty* red = layout.find("red");
  const PlyProperty* green = layout.find("green");
  const PlyProperty* blue = layout.find("blue");
  bool has_n = nx && ny && nz;
  bool has_c = red && green && blue;
  double c_scale = has_c && (red->type == "uchar" || red->type == "uint8")
                       ? 1.0 / 255.0
                       : 1.0;

  PointCloud pc;
  pc.points.reserve(layout.count);
  for (size_t i = 0; i < layout.count; ++i) {
    const char* rec = data.data() + i * layout.stride;
    pc.points.emplace_back(decode_prop(rec, *x), decode_prop(rec, *y),
                           decode_prop(rec, *z));
    if (has_n)
      pc.normals.emplace_back(decode_prop(rec, *nx), decode_prop(rec, *ny),
                              decode_prop(rec, *nz));
    if (has_c)
      pc.colors.emplace_back(c_scale * decode_prop(rec, *red),
                             c_scale * decode_prop(rec, *green),
                             c_scale * decode_prop(rec, *blue));
  }
  return pc;
}

void write_ply_surfels(const std::string& path, const SurfelMap& map) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write PLY: " + path);
  f << "ply\nformat binary_little_endian 1.0\nelement vertex " << map.size()
    << "\nproperty float x\nproperty float y\nproperty float z\n"
       "property float nx\nproperty float ny\nproperty float nz\n"
       "property float tux\nproperty float tuy\nproperty float tuz\n"
       "property float su\nproperty float sv\nproperty float opacity\n"
       "property float red\nproperty float green\nproperty float blue\n"
       "end_header\n";
  std::string buf;
  buf.reserve(map.size() * 60);
  for (size_t i = 0; i < map.size(); ++i) {
    const Surfel& s = map[i];
    Eigen::Matrix3d R = s.rotation();
    for (int k = 0; k < 3; ++k) put_f32(buf, s.p[k]);
    for (int k = 0; k < 3; ++k) put_f32(buf, R.col(2)[k]);
    for (int k = 0; k < 3; ++k) put_f32(buf, R.col(0)[k]);
    put_f32(buf, s.su());
    put_f32(buf, s.sv());
    put_f32(buf, s.alpha());
    for (int k = 0; k < 3; ++k) put_f32(buf, s.color[k]);
  }
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("short write to PLY: " + path);
}

SurfelMap read_ply_surfels(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open PLY: " + path);
  PlyVertexLayout layout = read_ply_header(f, path);
  std::vector<char> data = read_ply_records(f, layout, path);

  const char* needed[] = {"x",   "y",   "z",  "nx", "ny",      "nz",  "tux",
                          "tuy", "tuz", "su", "sv", "opacity", "red", "green",
                          "blue"};
  std::vector<const PlyProperty*> p;
  for (const char* name : needed) {
    const PlyProperty* prop = layout.find(name);
    if (!prop)
      throw std::runtime_error(std::string("surfel PLY lacks property ") +
                               name + ": " + path);
    p.push_back(prop);
  }

  SurfelMap map;
  for (size_t i = 0; i < layout.count; ++i) {
    const char* rec = data.data() + i * layout.stride;
    auto v3 = [&](int k0) {
      return Eigen::Vector3d(decode_prop(rec, *p[k0]),
                             decode_prop(rec, *p[k0 + 1]),
                             decode_prop(rec, *p[k0 + 2]));
    };
    Surfel s;
    s.p = v3(0);
    Eigen::Vector3d n = v3(3).normalized();
    Eigen::Vector3d tu = v3(6);
    tu = (tu - tu.dot(n) * n).normalized();  // re-orthonormalize after f32
    Eigen::Matrix3d R;
    R.col(0) = tu;
    R.col(1) = n.cross(tu);
    R.col(2) = n;
    s.q = Eigen::Quaterniond(R);
    double su = std::max(decode_prop(rec, *p[9]), 1e-9);
    double sv = std::max(decode_prop(rec, *p[10]), 1e-9);
    s.log_s = Eigen::Vector2d(std::log(su), std::log(sv));
    double a =
        std::min(std::max(decode_prop(rec, *p[11]), 1e-6), 1.0 - 1e-6);
    s.logit_alpha = std::log(a / (1.0 - a));
    s.color = v3(12);
    map.add(s);
  }
  return map;
}

}  // namespace sslam
