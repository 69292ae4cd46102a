#include <algorithm>
#include <cmath>
#include <limits>

#include "retinavr/error.hpp"
#include "retinavr/task.hpp"

namespace retinavr {

namespace {

TaskEvent make_event(EventType type, std::int64_t t_ms, int index = -1, Point3 position = {},
                     double value = 0.0) {
  return TaskEvent{type, t_ms, index, position, value};
}

}  // namespace

void navigation_rule(NavigationState& nav, const Point3& tip, std::int64_t dt_ms, std::int64_t t_ms,
                     const TaskConfig& cfg, EventList& events) {
  if (nav.active_contact) {
    const int i = *nav.active_contact;
    NavSphere& sphere = nav.spheres[i];
    if (sphere_contact(tip, sphere.center, sphere.radius)) {
      nav.dwell_ms += dt_ms;
      if (nav.dwell_ms >= cfg.dwell_required_ms) {
        sphere.collected = true;
        nav.active_contact.reset();
        nav.dwell_ms = 0;
        events.push_back(make_event(EventType::SphereCollected, t_ms, i, sphere.center));
      }
      return;
    }
    // Contact lost before the dwell completed: any exit fully resets dwell.
    ++sphere.exits;
    ++nav.exits;
    nav.active_contact.reset();
    nav.dwell_ms = 0;
    events.push_back(make_event(EventType::SphereExited, t_ms, i, sphere.center));
  }

  for (int i = 0; i < static_cast<int>(nav.spheres.size()); ++i) {
    const NavSphere& sphere = nav.spheres[i];
    if (!sphere.collected && sphere_contact(tip, sphere.center, sphere.radius)) {
      nav.active_contact = i;
      nav.dwell_ms = 0;
      ++nav.contact_episodes;
      break;
    }
  }
}

void tremor_rule(TremorState& tremor, const Point3& tip, std::int64_t dt_ms, const TaskConfig& cfg,
                 EventList& events, std::int64_t t_ms) {
  const double length = tremor.path.length();
  const bool contact = distance(tip, tremor.target_center()) <= tremor.target_radius;
  if (contact) {
    tremor.engaged = true;
    tremor.s_mm = std::min(length, tremor.s_mm + cfg.path_speed_mm_s * static_cast<double>(dt_ms) / 1000.0);
    tremor.contact_ms += static_cast<double>(dt_ms);
  } else if (tremor.in_contact) {
    ++tremor.exits;
    events.push_back(make_event(EventType::SphereExited, t_ms, 0, tremor.target_center()));
  }
  tremor.in_contact = contact;

  if (tremor.engaged) {
    const double dev = tremor.path.distance_to(tip);
    tremor.deviation_integral += dev * static_cast<double>(dt_ms);
    tremor.deviation_time_ms += static_cast<double>(dt_ms);
    tremor.max_dev_mm = std::max(tremor.max_dev_mm, dev);
  }
}

void peeling_rule(PeelingState& peel, const Point3& tip, bool grip, const TaskConfig& cfg,
                  EventList& events, std::int64_t t_ms) {
  const int n = static_cast<int>(peel.patches.size());

  if (grip && !peel.grip_was_down) {
    int nearest = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (!peel.patches[i].attached) continue;
      const double d = distance(tip, peel.patches[i].center);
      if (d <= cfg.grab_radius_mm && d < best) {
        best = d;
        nearest = i;
      }
    }
    if (nearest >= 0) {
      peel.grasped_patch = nearest;
      peel.grasp_anchor = tip;
      peel.pulls_consumed = 0;
      peel.max_pull_mm = 0.0;
      peel.grasp_productive = true;
      ++peel.grasps;
      events.push_back(make_event(EventType::PatchGrasped, t_ms, nearest, peel.patches[nearest].center));
    }
  }

  if (!grip) {
    peel.grasped_patch.reset();
  } else if (peel.grasped_patch) {
    peel.max_pull_mm = std::max(peel.max_pull_mm, distance(tip, peel.grasp_anchor));
    const int pulls = static_cast<int>(std::floor(peel.max_pull_mm / cfg.pull_threshold_mm));
    while (peel.grasp_productive && peel.pulls_consumed < pulls) {
      ++peel.pulls_consumed;
      int target = -1;
      if (peel.pulls_consumed == 1) {
        const int g = *peel.grasped_patch;
        if (peel.eligible(g)) {
          target = g;
        } else {
          peel.grasp_productive = false;
          break;
        }
      } else {
        // Continue peeling into the nearest attached patch bordering the detached region.
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i) {
          if (!peel.patches[i].attached) continue;
          bool borders = false;
          for (int nb : peel.neighbors(i)) borders = borders || !peel.patches[nb].attached;
          if (!borders) continue;
          const double d = distance(tip, peel.patches[i].center);
          if (d < best) {
            best = d;
            target = i;
          }
        }
        if (target < 0) break;
      }
      peel.patches[target].attached = false;
      events.push_back(make_event(EventType::PatchDetached, t_ms, target, peel.patches[target].center));
    }
  }
  peel.grip_was_down = grip;
}

bool deposit_spot(RetinalBreak& brk, const LaserSpot& spot, const EyeModel& eye, double threshold) {
  for (auto& cell : brk.cells) {
    if (geodesic_distance_mm(cell.center, spot.position, eye) <= spot.radius) {
      cell.accumulated += spot.intensity;
    }
  }
  if (brk.treated) return false;
  const bool all = std::all_of(brk.cells.begin(), brk.cells.end(),
                               [&](const CoverageCell& c) { return c.accumulated >= threshold; });
  brk.treated = all;
  return all;
}

namespace {

void fire_shot(LaserState& laser, const InstrumentState& probe, std::int64_t t_ms,
               const TaskConfig& cfg, const EyeModel& eye, EventList& events) {
  std::optional<RaySurfaceHit> hit;
  if (retinal_clearance(probe.tip, eye) > 0.0) hit = retina_raycast(probe.tip, probe.axis, eye);
  if (!hit) {
    ++laser.shots_missed;
    events.push_back(make_event(EventType::ShotMissed, t_ms, -1, probe.tip));
    return;
  }
  LaserSpot spot;
  spot.position = hit->point;
  spot.radius = cfg.spot_base_radius_mm + cfg.spot_growth_per_mm * hit->distance;
  const double ratio = cfg.spot_base_radius_mm / spot.radius;
  spot.intensity = ratio * ratio;
  spot.t_ms = t_ms;
  laser.spots.push_back(spot);
  events.push_back(make_event(EventType::SpotFired, t_ms, static_cast<int>(laser.spots.size()) - 1,
                              spot.position, spot.radius));
  for (int b = 0; b < static_cast<int>(laser.breaks.size()); ++b) {
    if (deposit_spot(laser.breaks[b], spot, eye, cfg.treat_threshold)) {
      events.push_back(make_event(EventType::BreakTreated, t_ms, b, laser.breaks[b].center));
    }
  }
}

}  // namespace

void laser_rule(LaserState& laser, const InstrumentState& probe, bool grip, std::int64_t t_ms,
                const TaskConfig& cfg, const EyeModel& eye, EventList& events) {
  if (!grip) {
    laser.trigger_held = false;
    return;
  }
  if (!laser.trigger_held) {
    laser.trigger_held = true;
    laser.next_fire_ms = t_ms + cfg.repeat_interval_ms;
    fire_shot(laser, probe, t_ms, cfg, eye, events);
    return;
  }
  // Repeat mode: one shot per interval boundary crossed since the last tick.
  while (t_ms >= laser.next_fire_ms) {
    fire_shot(laser, probe, laser.next_fire_ms, cfg, eye, events);
    laser.next_fire_ms += cfg.repeat_interval_ms;
  }
}

}  // namespace retinavr
