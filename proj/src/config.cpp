#include "sslam/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <variant>
#include <vector>

#include <json.hpp>

namespace sslam {

namespace {

using nlohmann::json;

/// String-valued adapter for enum members so they share the field table.
struct EnumRef {
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

using FieldRef = std::variant<double*, int*, bool*, std::string*, uint64_t*,
                              std::vector<double>*, EnumRef>;

struct Field {
  const char* key;
  FieldRef ref;
};

struct Section {
  const char* name;
  std::vector<Field> fields;
};

/// One flat description of the whole config; every walker (JSON in, JSON
/// out, environment) traverses this same table, so the three stay in sync.
std::vector<Section> bind(FullConfig& c) {
  return {
      {"dataset",
       {{"source", &c.dataset.source},
        {"fx", &c.dataset.fx},
        {"fy", &c.dataset.fy},
        {"cx", &c.dataset.cx},
        {"cy", &c.dataset.cy},
        {"width", &c.dataset.width},
        {"height", &c.dataset.height},
        {"depth_scale", &c.dataset.depth_scale},
        {"noise_sigma", &c.dataset.noise_sigma},
        {"dropout", &c.dataset.dropout},
        {"seed", &c.dataset.seed},
        {"max_frames", &c.dataset.max_frames}}},
      {"render",
       {{"tau", &c.render.tau},
        {"depth_mode",
         EnumRef{[&c] { return to_string(c.render.depth_mode); },
                 [&c](const std::string& s) {
                   c.render.depth_mode = parse_depth_mode(s);
                 }}},
        {"gauss_cutoff", &c.render.gauss_cutoff},
        {"t_min", &c.render.t_min},
        {"alpha_min", &c.render.alpha_min},
        {"near_z", &c.render.near_z},
        {"valid_alpha", &c.render.valid_alpha},
        {"tile_size", &c.render.tile_size},
        {"threads", &c.render.threads}}},
      {"mapping",
       {{"gamma_d", &c.mapping.gamma_d},
        {"gamma_n", &c.mapping.gamma_n},
        {"iterations_per_window", &c.mapping.iterations_per_window},
        {"map_every", &c.mapping.map_every},
        {"lr_p", &c.mapping.lr_p},
        {"lr_q", &c.mapping.lr_q},
        {"lr_log_s", &c.mapping.lr_log_s},
        {"lr_logit_alpha", &c.mapping.lr_logit_alpha},
        {"lr_color", &c.mapping.lr_color},
        {"final_refine_multiplier", &c.mapping.final_refine_multiplier}}},
      {"tracking",
       {{"lambda_c", &c.tracking.lambda_c},
        {"lambda_d", &c.tracking.lambda_d},
        {"iterations", &c.tracking.iterations},
        {"lr_trans", &c.tracking.lr_trans},
        {"lr_rot", &c.tracking.lr_rot},
        {"radial_enabled", &c.tracking.radial_enabled},
        {"tracker",
         EnumRef{[&c] { return to_string(c.tracking.tracker); },
                 [&c](const std::string& s) {
                   c.tracking.tracker = parse_tracker(s);
                 }}},
        {"min_valid_fraction", &c.tracking.min_valid_fraction}}},
      {"management",
       {{"delta_t", &c.management.delta_T},
        {"delta_d", &c.management.delta_d},
        {"delta_c", &c.management.delta_c},
        {"sample_stride", &c.management.sample_stride},
        {"alpha_floor", &c.management.alpha_floor}}},
      {"keyframe",
       {{"delta_r", &c.keyframe.delta_r}, {"delta_t", &c.keyframe.delta_t}}},
      {"icp",
       {{"levels", &c.icp.levels},
        {"iterations_per_level", &c.icp.iterations_per_level},
        {"max_pair_distance", &c.icp.max_pair_distance},
        {"max_normal_angle", &c.icp.max_normal_angle},
        {"min_pairs", &c.icp.min_pairs}}},
      {"basin",
       {{"radii", &c.basin.radii},
        {"trials_per_radius", &c.basin.trials_per_radius},
        {"steps", &c.basin.steps},
        {"success_radius", &c.basin.success_radius},
        {"early_exit_radius", &c.basin.early_exit_radius},
        {"target_view", &c.basin.target_view},
        {"lr_trans_start", &c.basin.lr_trans_start},
        {"lr_trans_end", &c.basin.lr_trans_end},
        {"lr_rot_start", &c.basin.lr_rot_start},
        {"lr_rot_end", &c.basin.lr_rot_end},
        {"seed", &c.basin.seed},
        {"train_iterations", &c.basin.train_iterations},
        {"threads", &c.basin.threads}}},
      {"output",
       {{"dir", &c.output.dir},
        {"pointcloud_stride", &c.output.pointcloud_stride}}},
  };
}

void assign_from_json(const FieldRef& ref, const json& v) {
  std::visit(
      [&](auto&& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, EnumRef>) p.set(v.get<std::string>());
        else *p = v.get<std::remove_pointer_t<P>>();
      },
      ref);
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw std::runtime_error("not a boolean: '" + s + "'");
}

void assign_from_string(const FieldRef& ref, const std::string& s) {
  std::visit(
      [&](auto&& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, double*>) *p = std::stod(s);
        else if constexpr (std::is_same_v<P, int*>) *p = std::stoi(s);
        else if constexpr (std::is_same_v<P, bool*>) *p = parse_bool(s);
        else if constexpr (std::is_same_v<P, std::string*>) *p = s;
        else if constexpr (std::is_same_v<P, uint64_t*>) *p = std::stoull(s);
        else if constexpr (std::is_same_v<P, std::vector<double>*>) {
          std::vector<double> out;
          std::stringstream ss(s);
          std::string item;
          while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
          *p = std::move(out);
        } else {
          static_assert(std::is_same_v<P, EnumRef>);
          p.set(s);
        }
      },
      ref);
}

json field_to_json(const FieldRef& ref) {
  return std::visit(
      [](auto&& p) -> json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, EnumRef>) return p.get();
        else return *p;
      },
      ref);
}

std::string env_name(const char* section, const char* key) {
  std::string out = "SSLAM_";
  for (const char* s = section; *s; ++s)
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(*s)));
  out += '_';
  for (const char* s = key; *s; ++s)
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(*s)));
  return out;
}

}  // namespace

DepthMode parse_depth_mode(const std::string& s) {
  if (s == "mean") return DepthMode::Mean;
  if (s == "median") return DepthMode::Median;
  if (s == "adaptive") return DepthMode::Adaptive;
  throw std::runtime_error("unknown depth mode '" + s +
                           "' (expected mean|median|adaptive)");
}

std::string to_string(DepthMode mode) {
  switch (mode) {
    case DepthMode::Mean: return "mean";
    case DepthMode::Median: return "median";
    case DepthMode::Adaptive: return "adaptive";
  }
  return "adaptive";
}

TrackerKind parse_tracker(const std::string& s) {
  if (s == "coupled") return TrackerKind::Coupled;
  if (s == "icp") return TrackerKind::Icp;
  throw std::runtime_error("unknown tracker '" + s + "' (expected coupled|icp)");
}

std::string to_string(TrackerKind kind) {
  return kind == TrackerKind::Icp ? "icp" : "coupled";
}

FullConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error(path + ": top level must be an object");

  FullConfig cfg;
  auto sections = bind(cfg);
  for (const auto& [sec_name, sec_val] : j.items()) {
    const Section* sec = nullptr;
    for (const Section& s : sections)
      if (sec_name == s.name) sec = &s;
    if (!sec) throw std::runtime_error(path + ": unknown section '" + sec_name + "'");
    if (!sec_val.is_object())
      throw std::runtime_error(path + ": section '" + sec_name + "' must be an object");
    for (const auto& [key, val] : sec_val.items()) {
      const Field* field = nullptr;
      for (const Field& fl : sec->fields)
        if (key == fl.key) field = &fl;
      if (!field)
        throw std::runtime_error(path + ": unknown key '" + sec_name + "." +
                                 key + "'");
      try {
        assign_from_json(field->ref, val);
      } catch (const std::exception& e) {
        throw std::runtime_error(path + ": bad value for '" + sec_name + "." +
                                 key + "': " + e.what());
      }
    }
  }
  return cfg;
}

int apply_env_overrides(FullConfig& cfg) {
  int applied = 0;
  for (const Section& sec : bind(cfg)) {
    for (const Field& field : sec.fields) {
      std::string name = env_name(sec.name, field.key);
      const char* val = std::getenv(name.c_str());
      if (!val) continue;
      try {
        assign_from_string(field.ref, val);
      } catch (const std::exception& e) {
        throw std::runtime_error("bad value in " + name + ": " + e.what());
      }
      ++applied;
    }
  }
  return applied;
}

void save_config(const FullConfig& cfg, const std::string& path) {
  json j;
  // bind() takes a mutable reference only so the same table serves loading.
  for (const Section& sec : bind(const_cast<FullConfig&>(cfg)))
    for (const Field& field : sec.fields)
      j[sec.name][field.key] = field_to_json(field.ref);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write config file: " + path);
  f << j.dump(2) << '\n';
}

}  // namespace sslam
