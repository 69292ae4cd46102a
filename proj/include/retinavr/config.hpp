#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"
#include "retinavr/geom.hpp"

namespace retinavr {

enum class TaskKind { Navigation, Tremor, Peeling, Laser };

inline constexpr TaskKind kAllTasks[] = {TaskKind::Navigation, TaskKind::Tremor, TaskKind::Peeling,
                                         TaskKind::Laser};

std::string_view to_string(TaskKind kind);
/// Accepts the lower-case module names ("navigation", "tremor", "peeling", "laser").
TaskKind parse_task_kind(std::string_view name);

/// Every tunable constant of the simulator. Defaults are the shipped values.
struct TaskConfig {
  // Globe and instruments.
  double retina_radius_mm = 12.0;
  double trocar_polar_deg = 50.0;  // from the anterior pole
  double lateral_scale = 0.5;
  double depth_scale = 1.0;
  double ergonomic_rotation_deg = 45.0;
  double rest_depth_mm = 10.0;
  double min_insertion_mm = 0.5;
  double eye_rotation_rate_deg_s = 30.0;
  double touch_engage_mm = 0.1;
  double touch_release_mm = 0.5;

  // Navigation Training.
  int sphere_count = 10;
  double sphere_radius_mm = 1.5;
  std::int64_t dwell_required_ms = 2000;
  double sphere_min_depth_mm = 2.0;
  double sphere_max_depth_mm = 10.0;
  double sphere_min_separation_mm = 4.0;
  /// Sphere directions are restricted to z <= this fraction of the radius,
  /// which keeps targets out of the anterior segment.
  double sphere_max_anterior = 0.5;
  int placement_attempts = 100000;

  // Tremor Control.
  double path_polar_deg = 60.0;  // from the posterior pole
  double path_arc_deg = 180.0;
  double path_inset_mm = 1.5;
  double path_speed_mm_s = 10.0;
  double target_radius_mm = 1.2;

  // Peeling Control.
  int membrane_rings = 4;
  int membrane_sectors = 12;
  double membrane_radius_mm = 3.0;
  double grab_radius_mm = 1.0;
  double pull_threshold_mm = 0.8;

  // Laser Precision.
  int break_count = 5;
  double break_polar_deg = 60.0;  // from the posterior pole
  double break_inner_mm = 1.0;
  double break_outer_mm = 2.2;
  int coverage_rows = 2;
  int coverage_sectors = 24;
  double spot_base_radius_mm = 0.3;
  double spot_growth_per_mm = 0.15;
  double treat_threshold = 1.0;
  std::int64_t repeat_interval_ms = 200;

  void validate() const;
  EyeModel eye() const;
  TrocarRig rig() const;
  TouchEpisodeTracker touch_tracker() const;

  bool operator==(const TaskConfig&) const = default;
};

void to_json(nlohmann::json& j, const TaskConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected with InvalidConfig.
void from_json(const nlohmann::json& j, TaskConfig& cfg);

/// Reads a JSON config file. Throws IoError or InvalidConfig.
TaskConfig load_config_file(const std::string& path);

void to_json(nlohmann::json& j, const Point3& p);
void from_json(const nlohmann::json& j, Point3& p);
void to_json(nlohmann::json& j, const Pose& pose);
void from_json(const nlohmann::json& j, Pose& pose);

}  // namespace retinavr
