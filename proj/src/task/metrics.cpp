#include <array>
#include <limits>

#include "retinavr/error.hpp"
#include "retinavr/task.hpp"

namespace retinavr {

namespace {

constexpr std::array<std::string_view, 10> kEventNames = {
    "SphereCollected", "SphereExited", "PatchGrasped", "PatchDetached",        "SpotFired",
    "ShotMissed",      "BreakTreated", "RetinalTouch", "MagnificationToggled", "TaskCompleted",
};

SpotRecord describe_spot(const LaserSpot& spot, const LaserState& laser, const EyeModel& eye) {
  SpotRecord rec;
  rec.global = spot.position;
  rec.radius_mm = spot.radius;
  rec.intensity = spot.intensity;
  rec.t_ms = spot.t_ms;
  double best = std::numeric_limits<double>::infinity();
  for (int b = 0; b < static_cast<int>(laser.breaks.size()); ++b) {
    const double d = geodesic_distance_mm(spot.position, laser.breaks[b].center, eye);
    if (d < best) {
      best = d;
      rec.break_index = b;
    }
  }
  if (rec.break_index >= 0) {
    rec.geodesic_mm = best;
    // The nearest break lies well within its own hemisphere, so the projection exists.
    const auto local = gnomonic_project(eye, laser.breaks[rec.break_index].frame, spot.position);
    if (local) {
      rec.local_x_mm = local->first;
      rec.local_y_mm = local->second;
    }
  }
  return rec;
}

}  // namespace

std::string_view to_string(EventType type) { return kEventNames[static_cast<std::size_t>(type)]; }

EventType parse_event_type(std::string_view name) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == name) return static_cast<EventType>(i);
  }
  throw Error(ErrorCode::CorruptLog, "unknown event type '" + std::string(name) + "'");
}

std::vector<std::string> metric_names(TaskKind kind) {
  switch (kind) {
    case TaskKind::Navigation: return {"efficiency", "safety", "sphere_exits"};
    case TaskKind::Tremor: return {"efficiency", "safety", "sphere_exits", "mean_dev_mm", "max_dev_mm"};
    case TaskKind::Peeling: return {"efficiency", "safety", "grasps"};
    case TaskKind::Laser: return {"efficiency", "safety", "laser_spots"};
  }
  return {};
}

std::vector<MetricValue> MetricsReport::values() const {
  std::vector<MetricValue> out{{"efficiency", completion_time_s},
                               {"safety", static_cast<double>(retinal_touches)}};
  switch (module) {
    case TaskKind::Navigation:
      out.push_back({"sphere_exits", static_cast<double>(sphere_exits)});
      break;
    case TaskKind::Tremor:
      out.push_back({"sphere_exits", static_cast<double>(sphere_exits)});
      out.push_back({"mean_dev_mm", mean_dev_mm});
      out.push_back({"max_dev_mm", max_dev_mm});
      break;
    case TaskKind::Peeling:
      out.push_back({"grasps", static_cast<double>(grasps)});
      break;
    case TaskKind::Laser:
      out.push_back({"laser_spots", static_cast<double>(laser_spots)});
      break;
  }
  return out;
}

MetricsReport finalize_metrics(const TaskState& state, bool force) {
  if (!state.completed && !force) throw Error(ErrorCode::TaskNotComplete, "task has not completed");
  MetricsReport r;
  r.module = state.kind;
  r.completed = state.completed;
  r.completion_time_s = static_cast<double>(state.elapsed_ms) / 1000.0;
  r.retinal_touches = state.touch.touch_count;
  const EyeModel eye = state.config.eye();
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, NavigationState>) {
          r.sphere_exits = t.exits;
        } else if constexpr (std::is_same_v<T, TremorState>) {
          r.sphere_exits = t.exits;
          r.mean_dev_mm = t.mean_dev_mm();
          r.max_dev_mm = t.max_dev_mm;
        } else if constexpr (std::is_same_v<T, PeelingState>) {
          r.grasps = t.grasps;
        } else {
          r.laser_spots = static_cast<int>(t.spots.size());
          for (const auto& s : t.spots) r.spots.push_back(describe_spot(s, t, eye));
          for (const auto& b : t.breaks) r.per_break_treated.push_back(b.treated);
        }
      },
      state.task);
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["module"] = to_string(r.module);
  j["completed"] = r.completed;
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& m : r.values()) metrics[m.name] = m.value;
  j["metrics"] = metrics;
  if (r.module == TaskKind::Laser) {
    nlohmann::json spots = nlohmann::json::array();
    for (const auto& s : r.spots) {
      spots.push_back({{"global", s.global},
                       {"break", s.break_index},
                       {"local", {s.local_x_mm, s.local_y_mm}},
                       {"geodesic_mm", s.geodesic_mm},
                       {"radius_mm", s.radius_mm},
                       {"intensity", s.intensity},
                       {"t_ms", s.t_ms}});
    }
    j["spots"] = spots;
    j["per_break_treated"] = r.per_break_treated;
  }
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.module = parse_task_kind(j.at("module").get<std::string>());
    r.completed = j.at("completed").get<bool>();
    const auto& m = j.at("metrics");
    r.completion_time_s = m.at("efficiency").get<double>();
    r.retinal_touches = static_cast<int>(m.at("safety").get<double>());
    switch (r.module) {
      case TaskKind::Navigation:
        r.sphere_exits = static_cast<int>(m.at("sphere_exits").get<double>());
        break;
      case TaskKind::Tremor:
        r.sphere_exits = static_cast<int>(m.at("sphere_exits").get<double>());
        r.mean_dev_mm = m.at("mean_dev_mm").get<double>();
        r.max_dev_mm = m.at("max_dev_mm").get<double>();
        break;
      case TaskKind::Peeling:
        r.grasps = static_cast<int>(m.at("grasps").get<double>());
        break;
      case TaskKind::Laser:
        r.laser_spots = static_cast<int>(m.at("laser_spots").get<double>());
        for (const auto& s : j.at("spots")) {
          SpotRecord rec;
          rec.global = s.at("global").get<Point3>();
          rec.break_index = s.at("break").get<int>();
          rec.local_x_mm = s.at("local").at(0).get<double>();
          rec.local_y_mm = s.at("local").at(1).get<double>();
          rec.geodesic_mm = s.at("geodesic_mm").get<double>();
          rec.radius_mm = s.at("radius_mm").get<double>();
          rec.intensity = s.at("intensity").get<double>();
          rec.t_ms = s.at("t_ms").get<std::int64_t>();
          r.spots.push_back(rec);
        }
        r.per_break_treated = j.at("per_break_treated").get<std::vector<bool>>();
        break;
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptLog, std::string("malformed metrics report: ") + e.what());
  }
}

nlohmann::json to_json(const TaskEvent& e) {
  nlohmann::json j{{"type", to_string(e.type)}, {"t_ms", e.t_ms}};
  if (e.index >= 0) j["index"] = e.index;
  if (e.position != Point3{}) j["position"] = e.position;
  if (e.value != 0.0) j["value"] = e.value;
  return j;
}

TaskEvent event_from_json(const nlohmann::json& j) {
  try {
    TaskEvent e;
    e.type = parse_event_type(j.at("type").get<std::string>());
    e.t_ms = j.at("t_ms").get<std::int64_t>();
    e.index = j.value("index", -1);
    if (j.contains("position")) e.position = j.at("position").get<Point3>();
    e.value = j.value("value", 0.0);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::CorruptLog, std::string("malformed event: ") + ex.what());
  }
}

}  // namespace retinavr
