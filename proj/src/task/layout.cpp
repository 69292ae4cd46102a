#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "retinavr/error.hpp"
#include "retinavr/rng.hpp"
#include "retinavr/task.hpp"

namespace retinavr {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDegToRad = kPi / 180.0;

NavigationState layout_navigation(const TaskConfig& cfg, Rng& rng) {
  NavigationState nav;
  int attempts = 0;
  while (static_cast<int>(nav.spheres.size()) < cfg.sphere_count) {
    if (++attempts > cfg.placement_attempts) {
      throw Error(ErrorCode::SeedPlacementFailure,
                  "could not place " + std::to_string(cfg.sphere_count) + " spheres after " +
                      std::to_string(cfg.placement_attempts) + " attempts");
    }
    const double z = rng.uniform(-1.0, cfg.sphere_max_anterior);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double depth = rng.uniform(cfg.sphere_min_depth_mm, cfg.sphere_max_depth_mm);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Point3 center = Point3{rho * std::cos(phi), rho * std::sin(phi), z} * depth;

    bool separated = true;
    for (const auto& s : nav.spheres) {
      if (distance(s.center, center) < cfg.sphere_min_separation_mm) {
        separated = false;
        break;
      }
    }
    if (separated) nav.spheres.push_back(NavSphere{center, cfg.sphere_radius_mm, false, 0});
  }
  return nav;
}

TremorState layout_tremor(const TaskConfig& cfg, const EyeModel& eye) {
  const TangentFrame pole = tangent_frame(eye.posterior_pole_dir);
  const double polar = cfg.path_polar_deg * kDegToRad;
  const double r = eye.retina_radius - cfg.path_inset_mm;

  TremorState tremor;
  tremor.path.circle_center = eye.center + pole.normal * (r * std::cos(polar));
  tremor.path.normal = pole.normal;
  tremor.path.e1 = pole.e1;
  tremor.path.e2 = pole.e2;
  tremor.path.radius = r * std::sin(polar);
  tremor.path.arc_rad = cfg.path_arc_deg * kDegToRad;
  tremor.target_radius = cfg.target_radius_mm;
  return tremor;
}

PeelingState layout_peeling(const TaskConfig& cfg, const EyeModel& eye) {
  const TangentFrame pole = tangent_frame(eye.posterior_pole_dir);
  PeelingState peel;
  peel.rings = cfg.membrane_rings;
  peel.sectors = cfg.membrane_sectors;
  const double ring_width = cfg.membrane_radius_mm / cfg.membrane_rings;
  for (int ring = 0; ring < peel.rings; ++ring) {
    for (int sector = 0; sector < peel.sectors; ++sector) {
      const double heading = (sector + 0.5) * 2.0 * kPi / peel.sectors;
      MembranePatch patch;
      patch.center = surface_point_at(eye, pole, (ring + 0.5) * ring_width, heading);
      patch.ring = ring;
      patch.sector = sector;
      peel.patches.push_back(patch);
    }
  }
  return peel;
}

LaserState layout_laser(const TaskConfig& cfg, const EyeModel& eye) {
  const TangentFrame pole = tangent_frame(eye.posterior_pole_dir);
  const double polar_mm = cfg.break_polar_deg * kDegToRad * eye.retina_radius;
  const double row_width = (cfg.break_outer_mm - cfg.break_inner_mm) / cfg.coverage_rows;

  LaserState laser;
  for (int b = 0; b < cfg.break_count; ++b) {
    RetinalBreak brk;
    brk.center = surface_point_at(eye, pole, polar_mm, 2.0 * kPi * b / cfg.break_count);
    brk.frame = tangent_frame(normalized(brk.center - eye.center));
    brk.r_in = cfg.break_inner_mm;
    brk.r_out = cfg.break_outer_mm;
    brk.rows = cfg.coverage_rows;
    brk.sectors = cfg.coverage_sectors;
    for (int row = 0; row < brk.rows; ++row) {
      for (int sector = 0; sector < brk.sectors; ++sector) {
        const double radius = brk.r_in + (row + 0.5) * row_width;
        const double heading = (sector + 0.5) * 2.0 * kPi / brk.sectors;
        brk.cells.push_back(CoverageCell{surface_point_at(eye, brk.frame, radius, heading), 0.0});
      }
    }
    laser.breaks.push_back(std::move(brk));
  }
  return laser;
}

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  void add(const Point3& p) {
    add(p.x);
    add(p.y);
    add(p.z);
  }
};

}  // namespace

EyeModel TaskState::eye() const {
  EyeModel e = config.eye();
  e.eye_rotation = eye_rotation;
  return e;
}

TaskState init_task(TaskKind kind, const TaskConfig& config, std::uint64_t seed,
                    const CalibrationOffset& calibration) {
  config.validate();
  const EyeModel eye = config.eye();
  config.rig().validate(eye);

  TaskState state;
  state.kind = kind;
  state.config = config;
  state.seed = seed;
  state.calibration = calibration;
  state.touch = config.touch_tracker();

  Rng rng(seed);
  switch (kind) {
    case TaskKind::Navigation: state.task = layout_navigation(config, rng); break;
    case TaskKind::Tremor: state.task = layout_tremor(config, eye); break;
    case TaskKind::Peeling: state.task = layout_peeling(config, eye); break;
    case TaskKind::Laser: state.task = layout_laser(config, eye); break;
  }
  state.layout_hash = layout_hash(state);
  return state;
}

std::uint64_t layout_hash(const TaskState& state) {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(state.kind));
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, NavigationState>) {
          for (const auto& s : t.spheres) {
            h.add(s.center);
            h.add(s.radius);
          }
        } else if constexpr (std::is_same_v<T, TremorState>) {
          h.add(t.path.circle_center);
          h.add(t.path.e1);
          h.add(t.path.e2);
          h.add(t.path.radius);
          h.add(t.path.arc_rad);
          h.add(t.target_radius);
        } else if constexpr (std::is_same_v<T, PeelingState>) {
          for (const auto& p : t.patches) h.add(p.center);
        } else {
          for (const auto& b : t.breaks) {
            h.add(b.center);
            for (const auto& c : b.cells) h.add(c.center);
          }
        }
      },
      state.task);
  return h.h;
}

Point3 TremorPath::point_at(double s_mm) const {
  const double phi = std::clamp(s_mm, 0.0, length()) / radius;
  return circle_center + (e1 * std::cos(phi) + e2 * std::sin(phi)) * radius;
}

double TremorPath::distance_to(const Point3& p) const {
  const Point3 d = p - circle_center;
  const double h = dot(d, normal);
  const Point3 in_plane = d - normal * h;
  const double rho = norm(in_plane);
  if (rho == 0.0) return std::sqrt(radius * radius + h * h);
  double phi = std::atan2(dot(in_plane, e2), dot(in_plane, e1));
  if (phi < 0.0) phi += 2.0 * kPi;
  if (phi <= arc_rad) return std::hypot(rho - radius, h);
  return std::min(distance(p, point_at(0.0)), distance(p, point_at(length())));
}

double TremorState::mean_dev_mm() const {
  return deviation_time_ms > 0.0 ? deviation_integral / deviation_time_ms : 0.0;
}

int NavigationState::collected_count() const {
  int n = 0;
  for (const auto& s : spheres) n += s.collected ? 1 : 0;
  return n;
}

std::vector<int> PeelingState::neighbors(int patch) const {
  const int ring = patch / sectors;
  const int sector = patch % sectors;
  std::vector<int> out;
  if (ring > 0) out.push_back(index(ring - 1, sector));
  if (ring + 1 < rings) out.push_back(index(ring + 1, sector));
  out.push_back(index(ring, (sector + 1) % sectors));
  out.push_back(index(ring, (sector + sectors - 1) % sectors));
  return out;
}

bool PeelingState::eligible(int patch) const {
  if (!patches[patch].attached) return false;
  if (patches[patch].ring == rings - 1) return true;
  for (int n : neighbors(patch)) {
    if (!patches[n].attached) return true;
  }
  return false;
}

int PeelingState::detached_count() const {
  int n = 0;
  for (const auto& p : patches) n += p.attached ? 0 : 1;
  return n;
}

double RetinalBreak::coverage_fraction(double threshold) const {
  if (cells.empty()) return 0.0;
  int covered = 0;
  for (const auto& c : cells) covered += c.accumulated >= threshold ? 1 : 0;
  return static_cast<double>(covered) / static_cast<double>(cells.size());
}

int LaserState::treated_count() const {
  int n = 0;
  for (const auto& b : breaks) n += b.treated ? 1 : 0;
  return n;
}

}  // namespace retinavr
