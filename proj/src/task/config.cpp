#include "retinavr/config.hpp"

#include <fstream>
#include <numbers>
#include <set>

#include "retinavr/error.hpp"

namespace retinavr {

namespace {

// Visits every (key, member) pair of TaskConfig; keeps to_json/from_json in sync.
template <typename Cfg, typename F>
void for_each_field(Cfg& c, F&& f) {
  f("retina_radius_mm", c.retina_radius_mm);
  f("trocar_polar_deg", c.trocar_polar_deg);
  f("lateral_scale", c.lateral_scale);
  f("depth_scale", c.depth_scale);
  f("ergonomic_rotation_deg", c.ergonomic_rotation_deg);
  f("rest_depth_mm", c.rest_depth_mm);
  f("min_insertion_mm", c.min_insertion_mm);
  f("eye_rotation_rate_deg_s", c.eye_rotation_rate_deg_s);
  f("touch_engage_mm", c.touch_engage_mm);
  f("touch_release_mm", c.touch_release_mm);
  f("sphere_count", c.sphere_count);
  f("sphere_radius_mm", c.sphere_radius_mm);
  f("dwell_required_ms", c.dwell_required_ms);
  f("sphere_min_depth_mm", c.sphere_min_depth_mm);
  f("sphere_max_depth_mm", c.sphere_max_depth_mm);
  f("sphere_min_separation_mm", c.sphere_min_separation_mm);
  f("sphere_max_anterior", c.sphere_max_anterior);
  f("placement_attempts", c.placement_attempts);
  f("path_polar_deg", c.path_polar_deg);
  f("path_arc_deg", c.path_arc_deg);
  f("path_inset_mm", c.path_inset_mm);
  f("path_speed_mm_s", c.path_speed_mm_s);
  f("target_radius_mm", c.target_radius_mm);
  f("membrane_rings", c.membrane_rings);
  f("membrane_sectors", c.membrane_sectors);
  f("membrane_radius_mm", c.membrane_radius_mm);
  f("grab_radius_mm", c.grab_radius_mm);
  f("pull_threshold_mm", c.pull_threshold_mm);
  f("break_count", c.break_count);
  f("break_polar_deg", c.break_polar_deg);
  f("break_inner_mm", c.break_inner_mm);
  f("break_outer_mm", c.break_outer_mm);
  f("coverage_rows", c.coverage_rows);
  f("coverage_sectors", c.coverage_sectors);
  f("spot_base_radius_mm", c.spot_base_radius_mm);
  f("spot_growth_per_mm", c.spot_growth_per_mm);
  f("treat_threshold", c.treat_threshold);
  f("repeat_interval_ms", c.repeat_interval_ms);
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Navigation: return "navigation";
    case TaskKind::Tremor: return "tremor";
    case TaskKind::Peeling: return "peeling";
    case TaskKind::Laser: return "laser";
  }
  return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
  for (TaskKind k : kAllTasks) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown module '" + std::string(name) + "'");
}

void TaskConfig::validate() const {
  bool finite = true;
  for_each_field(*this, [&](const char*, const auto& v) {
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) finite = finite && std::isfinite(v);
  });
  require(finite, "config contains a non-finite value");
  require(retina_radius_mm > 0.0, "retina_radius_mm must be positive");
  require(trocar_polar_deg > 0.0 && trocar_polar_deg < 90.0, "trocar_polar_deg must be in (0, 90)");
  require(lateral_scale > 0.0 && depth_scale > 0.0, "motion scales must be positive");
  require(min_insertion_mm >= 0.0 && rest_depth_mm > min_insertion_mm &&
              rest_depth_mm < 2.0 * retina_radius_mm,
          "rest_depth_mm outside the globe");
  require(eye_rotation_rate_deg_s >= 0.0, "eye_rotation_rate_deg_s must be non-negative");
  require(touch_engage_mm >= 0.0 && touch_release_mm >= touch_engage_mm,
          "touch thresholds require release >= engage >= 0");
  require(sphere_count > 0, "sphere_count must be positive");
  require(sphere_radius_mm > 0.0, "sphere_radius_mm must be positive");
  require(dwell_required_ms > 0, "dwell_required_ms must be positive");
  require(sphere_min_depth_mm >= 0.0 && sphere_max_depth_mm >= sphere_min_depth_mm &&
              sphere_max_depth_mm < retina_radius_mm,
          "sphere depth range invalid");
  require(sphere_min_separation_mm >= 0.0, "sphere_min_separation_mm must be non-negative");
  require(placement_attempts > 0, "placement_attempts must be positive");
  require(path_polar_deg > 0.0 && path_polar_deg < 180.0, "path_polar_deg out of range");
  require(path_arc_deg > 0.0 && path_arc_deg <= 360.0, "path_arc_deg out of range");
  require(path_inset_mm >= 0.0 && path_inset_mm < retina_radius_mm, "path_inset_mm out of range");
  require(path_speed_mm_s > 0.0 && target_radius_mm > 0.0, "path speed and target radius must be positive");
  require(membrane_rings > 0 && membrane_sectors >= 3, "membrane grid too small");
  require(membrane_radius_mm > 0.0 && grab_radius_mm > 0.0 && pull_threshold_mm > 0.0,
          "membrane distances must be positive");
  require(break_count > 0, "break_count must be positive");
  require(break_polar_deg > 0.0 && break_polar_deg < 180.0, "break_polar_deg out of range");
  require(break_outer_mm > break_inner_mm && break_inner_mm > 0.0, "break radii require outer > inner > 0");
  require(coverage_rows > 0 && coverage_sectors > 0, "coverage grid must be non-empty");
  require(spot_base_radius_mm > 0.0 && spot_growth_per_mm >= 0.0, "spot size parameters invalid");
  require(treat_threshold > 0.0, "treat_threshold must be positive");
  require(repeat_interval_ms > 0, "repeat_interval_ms must be positive");
}

EyeModel TaskConfig::eye() const {
  EyeModel eye;
  eye.retina_radius = retina_radius_mm;
  return eye;
}

TrocarRig TaskConfig::rig() const {
  const double polar = trocar_polar_deg * std::numbers::pi / 180.0;
  const double r = retina_radius_mm;
  TrocarRig rig;
  rig.trocar_left = Point3{0.0, r * std::sin(polar), r * std::cos(polar)};
  rig.trocar_right = Point3{0.0, -r * std::sin(polar), r * std::cos(polar)};
  rig.lateral_scale = lateral_scale;
  rig.depth_scale = depth_scale;
  rig.ergonomic_rotation_deg = ergonomic_rotation_deg;
  rig.rest_depth_mm = rest_depth_mm;
  rig.min_insertion_mm = min_insertion_mm;
  return rig;
}

TouchEpisodeTracker TaskConfig::touch_tracker() const {
  TouchEpisodeTracker t;
  t.engage_threshold_mm = touch_engage_mm;
  t.release_threshold_mm = touch_release_mm;
  return t;
}

void to_json(nlohmann::json& j, const TaskConfig& cfg) {
  j = nlohmann::json::object();
  for_each_field(cfg, [&](const char* key, const auto& v) { j[key] = v; });
}

void from_json(const nlohmann::json& j, TaskConfig& cfg) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  std::set<std::string> known;
  for_each_field(cfg, [&](const char* key, auto& v) {
    known.insert(key);
    auto it = j.find(key);
    if (it == j.end()) return;
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be a number");
    } else {
      if (!it->is_number_integer())
        throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be an integer");
    }
    v = it->template get<T>();
  });
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + item.key() + "'");
  }
}

TaskConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config file " + path + ": " + e.what());
  }
  TaskConfig cfg = j.get<TaskConfig>();
  cfg.validate();
  return cfg;
}

void to_json(nlohmann::json& j, const Point3& p) { j = nlohmann::json::array({p.x, p.y, p.z}); }

void from_json(const nlohmann::json& j, Point3& p) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvalidConfig, "point must be [x, y, z]");
  p = Point3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void to_json(nlohmann::json& j, const Pose& pose) {
  const auto& p = pose.position;
  const auto& q = pose.orientation;
  j = nlohmann::json::array({p.x, p.y, p.z, q.w, q.x, q.y, q.z});
}

void from_json(const nlohmann::json& j, Pose& pose) {
  if (!j.is_array() || j.size() != 7)
    throw Error(ErrorCode::InvalidConfig, "pose must be [x, y, z, qw, qx, qy, qz]");
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(ErrorCode::InvalidConfig, "pose entries must be numbers");
  }
  pose.position = Point3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  pose.orientation = UnitQuat{j[3].get<double>(), j[4].get<double>(), j[5].get<double>(), j[6].get<double>()};
}

}  // namespace retinavr
