#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "retinavr/config.hpp"
#include "retinavr/geom.hpp"

namespace retinavr {

/// One controller sample. Timestamps are client-clock milliseconds.
struct TickInput {
  std::int64_t t_ms = 0;
  Pose left_pose;
  Pose right_pose;
  bool grip_right = false;
  bool button_x_left = false;
  std::array<double, 2> joystick_right{0.0, 0.0};

  bool operator==(const TickInput&) const = default;
};

enum class EventType {
  SphereCollected,
  SphereExited,
  PatchGrasped,
  PatchDetached,
  SpotFired,
  ShotMissed,
  BreakTreated,
  RetinalTouch,
  MagnificationToggled,
  TaskCompleted,
};

std::string_view to_string(EventType type);
EventType parse_event_type(std::string_view name);

/// Flat event record; `index`, `position`, `value` are filled per type:
/// sphere/patch/break index, spot position, spot radius or touch count.
struct TaskEvent {
  EventType type = EventType::TaskCompleted;
  std::int64_t t_ms = 0;
  int index = -1;
  Point3 position;
  double value = 0.0;

  bool operator==(const TaskEvent&) const = default;
};

using EventList = std::vector<TaskEvent>;

// ---------------------------------------------------------------- Navigation

struct NavSphere {
  Point3 center;
  double radius = 1.5;
  bool collected = false;
  int exits = 0;
};

struct NavigationState {
  std::vector<NavSphere> spheres;
  std::optional<int> active_contact;
  std::int64_t dwell_ms = 0;
  int exits = 0;
  /// Contact episodes begun on uncollected targets.
  int contact_episodes = 0;

  int collected_count() const;
};

// -------------------------------------------------------------------- Tremor

/// Circular arc parameterized by arc length.
struct TremorPath {
  Point3 circle_center;
  Point3 normal;  // plane normal
  Point3 e1;
  Point3 e2;
  double radius = 0.0;
  double arc_rad = 0.0;

  double length() const { return radius * arc_rad; }
  Point3 point_at(double s_mm) const;
  /// Euclidean distance to the nearest point of the arc.
  double distance_to(const Point3& p) const;
};

struct TremorState {
  TremorPath path;
  double s_mm = 0.0;
  double target_radius = 1.2;
  int exits = 0;
  bool in_contact = false;
  /// Set by the first contact; deviation sampling starts here.
  bool engaged = false;
  double contact_ms = 0.0;
  double deviation_integral = 0.0;  // mm * ms
  double deviation_time_ms = 0.0;
  double max_dev_mm = 0.0;

  Point3 target_center() const { return path.point_at(s_mm); }
  double mean_dev_mm() const;
};

// ------------------------------------------------------------------- Peeling

struct MembranePatch {
  Point3 center;
  int ring = 0;
  int sector = 0;
  bool attached = true;
};

struct PeelingState {
  int rings = 4;
  int sectors = 12;
  std::vector<MembranePatch> patches;
  std::optional<int> grasped_patch;
  Point3 grasp_anchor;
  int grasps = 0;
  /// Pull thresholds already consumed by the current grasp.
  int pulls_consumed = 0;
  double max_pull_mm = 0.0;
  /// False once the current grasp turned out to hold an ineligible patch.
  bool grasp_productive = false;
  bool grip_was_down = false;

  int index(int ring, int sector) const { return ring * sectors + sector; }
  std::vector<int> neighbors(int patch) const;
  bool eligible(int patch) const;
  int detached_count() const;
};

// --------------------------------------------------------------------- Laser

struct CoverageCell {
  Point3 center;
  double accumulated = 0.0;
};

struct RetinalBreak {
  Point3 center;
  TangentFrame frame;
  double r_in = 1.0;
  double r_out = 2.2;
  int rows = 2;
  int sectors = 24;
  std::vector<CoverageCell> cells;  // row-major: row * sectors + sector
  bool treated = false;

  double coverage_fraction(double threshold) const;
};

struct LaserSpot {
  Point3 position;
  double radius = 0.3;
  double intensity = 1.0;
  std::int64_t t_ms = 0;
};

struct LaserState {
  std::vector<RetinalBreak> breaks;
  std::vector<LaserSpot> spots;
  int shots_missed = 0;
  bool trigger_held = false;
  std::int64_t next_fire_ms = 0;

  int treated_count() const;
};

// ------------------------------------------------------------------ Combined

struct TaskState {
  TaskKind kind = TaskKind::Navigation;
  TaskConfig config;
  std::uint64_t seed = 0;
  std::uint64_t layout_hash = 0;
  CalibrationOffset calibration;

  UnitQuat eye_rotation = UnitQuat::identity();
  TouchEpisodeTracker touch;
  std::optional<std::int64_t> last_t_ms;
  std::int64_t elapsed_ms = 0;
  bool completed = false;
  bool magnified = false;
  bool x_was_down = false;
  InstrumentState light_pipe;
  InstrumentState tool;

  std::variant<NavigationState, TremorState, PeelingState, LaserState> task;

  EyeModel eye() const;
};

/// Builds the seeded layout. Throws InvalidConfig or SeedPlacementFailure.
TaskState init_task(TaskKind kind, const TaskConfig& config, std::uint64_t seed,
                    const CalibrationOffset& calibration = {});

/// Hash of the seeded layout geometry; stored in session headers.
std::uint64_t layout_hash(const TaskState& state);

/// In-place tick. Throws NonMonotonicTimestamp or TaskAlreadyComplete before
/// touching the state.
EventList advance(TaskState& state, const TickInput& input);

/// Value-semantic form of advance().
std::pair<TaskState, EventList> tick(TaskState state, const TickInput& input);

// Per-task rules. `t_ms` stamps emitted events.

void navigation_rule(NavigationState& nav, const Point3& tip, std::int64_t dt_ms, std::int64_t t_ms,
                     const TaskConfig& cfg, EventList& events);

void tremor_rule(TremorState& tremor, const Point3& tip, std::int64_t dt_ms, const TaskConfig& cfg,
                 EventList& events, std::int64_t t_ms);

void peeling_rule(PeelingState& peel, const Point3& tip, bool grip, const TaskConfig& cfg,
                  EventList& events, std::int64_t t_ms);

void laser_rule(LaserState& laser, const InstrumentState& probe, bool grip, std::int64_t t_ms,
                const TaskConfig& cfg, const EyeModel& eye, EventList& events);

/// Accumulates one spot into a break's coverage; returns true when this spot
/// completes the treatment.
bool deposit_spot(RetinalBreak& brk, const LaserSpot& spot, const EyeModel& eye, double threshold);

bool task_finished(const TaskState& state);

// ------------------------------------------------------------------- Metrics

struct SpotRecord {
  Point3 global;
  int break_index = -1;
  double local_x_mm = 0.0;  // gnomonic, along the break's e1
  double local_y_mm = 0.0;  // gnomonic, along the break's e2
  double geodesic_mm = 0.0;  // from the assigned break center
  double radius_mm = 0.0;
  double intensity = 0.0;
  std::int64_t t_ms = 0;

  bool operator==(const SpotRecord&) const = default;
};

struct MetricValue {
  std::string name;
  double value = 0.0;
};

struct MetricsReport {
  TaskKind module = TaskKind::Navigation;
  bool completed = false;
  double completion_time_s = 0.0;
  int retinal_touches = 0;
  int sphere_exits = 0;
  double mean_dev_mm = 0.0;
  double max_dev_mm = 0.0;
  int grasps = 0;
  int laser_spots = 0;
  std::vector<SpotRecord> spots;
  std::vector<bool> per_break_treated;

  /// Efficiency, safety, then the module-specific metrics in export order.
  std::vector<MetricValue> values() const;

  bool operator==(const MetricsReport&) const = default;
};

/// Names of values() for a module, without needing a report.
std::vector<std::string> metric_names(TaskKind kind);

/// Throws TaskNotComplete unless the task completed or `force` is set.
MetricsReport finalize_metrics(const TaskState& state, bool force = false);

nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TaskEvent& event);
TaskEvent event_from_json(const nlohmann::json& j);

}  // namespace retinavr
