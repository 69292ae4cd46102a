#include "retinavr/trainee.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "retinavr/error.hpp"
#include "retinavr/rng.hpp"

namespace retinavr {

namespace {

constexpr std::int64_t kFrameMs = 11;  // ~90 Hz headset refresh
constexpr double kNoiseTauMs = 150.0;

// Base speeds for speed_factor 1, mm/s.
constexpr double kReachSpeed = 5.0;
constexpr double kPursuitSpeed = 0.6;
constexpr double kPullSpeed = 2.0;
// Laser sweeps are paced so that each cell collects about this many full doses.
constexpr double kSweepOverlap = 1.4;

constexpr double kPi = std::numbers::pi;

std::uint64_t mix(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_range(double v, double lo, double hi, const char* name, bool open_lo = false) {
  if (!std::isfinite(v) || v < lo || v > hi || (open_lo && v == lo)) {
    throw Error(ErrorCode::InvalidConfig, std::string("skill profile ") + name + " out of range");
  }
}

double segment_distance(const Point3& a, const Point3& b, const Point3& p, Point3* closest = nullptr) {
  const Point3 ab = b - a;
  const double len2 = dot(ab, ab);
  const double u = len2 > 0.0 ? std::clamp(dot(p - a, ab) / len2, 0.0, 1.0) : 0.0;
  const Point3 c = a + ab * u;
  if (closest) *closest = c;
  return distance(c, p);
}

Point3 any_perpendicular(const Point3& v) {
  const Point3 ref = std::abs(v.x) < 0.9 ? Point3{1, 0, 0} : Point3{0, 1, 0};
  return normalized(cross(v, ref));
}

class Operator {
 public:
  Operator(TaskKind kind, const SkillProfile& profile, std::uint64_t seed, int run_index,
           const ParticipantMeta& participant, const TaskConfig& config, double max_seconds)
      : p_(profile),
        learn_(std::pow(kRunImprovement, std::max(0, run_index - 1))),
        state_(init_task(kind, config, seed)),
        rng_(mix(seed ^ mix(static_cast<std::uint64_t>(kind) * 131 + static_cast<std::uint64_t>(run_index)))),
        max_ms_(static_cast<std::int64_t>(max_seconds * 1000.0)) {
    profile.validate();
    log_.header = make_header(state_, participant);
    noise_sd_ = p_.tremor_sd_mm * learn_;
    speed_ = p_.speed_factor / learn_;
    eye_ = state_.eye();
    rig_ = config.rig();
    // The hand starts at the calibrated rest pose, where the tip sits at rest depth.
    tip_ = rig_.trocar_right + normalized(eye_.center - rig_.trocar_right) * rig_.rest_depth_mm;
    ou_ = Point3{rng_.normal(0, noise_sd_), rng_.normal(0, noise_sd_), rng_.normal(0, noise_sd_)};
  }

  GeneratedSession run() {
    switch (state_.kind) {
      case TaskKind::Navigation: navigation(); break;
      case TaskKind::Tremor: tremor(); break;
      case TaskKind::Peeling: peeling(); break;
      case TaskKind::Laser: laser(); break;
    }
    return {std::move(log_), finalize_metrics(state_)};
  }

 private:
  // ----------------------------------------------------------- motor layer

  void frame() {
    if (state_.completed) return;
    if (t_ > max_ms_) {
      throw Error(ErrorCode::GenerationTimeout, std::string(to_string(state_.kind)) + " not finished after " +
                                                    std::to_string(max_ms_ / 1000) + " s of simulated time");
    }
    const double a = std::exp(-static_cast<double>(kFrameMs) / kNoiseTauMs);
    const double s = noise_sd_ * std::sqrt(1.0 - a * a);
    ou_ = ou_ * a + Point3{rng_.normal(0, s), rng_.normal(0, s), rng_.normal(0, s)};

    TickInput in;
    in.t_ms = t_;
    in.right_pose = controller_pose_for_tip(tip_, rig_, state_.calibration, Hand::Right, eye_);
    in.right_pose.position = in.right_pose.position + ou_;
    in.left_pose = state_.calibration.pose_offset_left;
    in.left_pose.position = in.left_pose.position + ou_ * 0.5;
    in.grip_right = grip_;
    advance(state_, in);
    log_.frames.push_back(in);
    t_ += kFrameMs;
  }

  bool done() const { return state_.completed; }

  /// Straight-line reach with a slowdown inside the approach margin.
  void move_to(const Point3& target, double speed, const std::function<bool()>& stop = {}) {
    const double margin = 1.0 + 2.0 * p_.caution;
    while (!done()) {
      const Point3 d = target - tip_;
      const double dist = norm(d);
      const double v = speed * std::clamp(dist / margin, 0.3, 1.0);
      const double step = v * kFrameMs / 1000.0;
      tip_ = dist <= step ? target : tip_ + d * (step / dist);
      frame();
      if (dist <= step || (stop && stop())) return;
    }
  }

  void hold(double ms, const std::function<bool()>& stop = {}) {
    for (double waited = 0.0; waited < ms && !done(); waited += kFrameMs) {
      frame();
      if (stop && stop()) return;
    }
  }

  void pause(double base_ms) { hold(base_ms * (0.5 + p_.caution) * learn_ * rng_.uniform(0.8, 1.2)); }

  double reach_speed() const { return kReachSpeed * speed_; }

  /// Over-travel toward the retina and back.
  void jab() {
    const Point3 home = tip_;
    const Point3 out = normalized(tip_ - eye_.center);
    const Point3 surface = eye_.center + out * (eye_.retina_radius + 0.3);
    move_to(surface, 3.0 * reach_speed());
    hold(80);
    move_to(home, reach_speed());
  }

  bool reckless_now(double per_second) {
    return rng_.bernoulli(p_.recklessness * learn_ * per_second * kFrameMs / 1000.0);
  }

  // ------------------------------------------------------------ Navigation

  const NavigationState& nav() const { return std::get<NavigationState>(state_.task); }

  bool blocked(const Point3& p, int target, double margin) const {
    const auto& s = nav().spheres;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
      if (i != target && !s[i].collected && distance(p, s[i].center) < s[i].radius + margin) return true;
    }
    return false;
  }

  /// Waypoints from `a` to `b` that stay clear of other uncollected spheres.
  void route(const Point3& a, const Point3& b, int target, int depth, std::vector<Point3>& out) const {
    const auto& s = nav().spheres;
    int hit = -1;
    double hit_u = std::numeric_limits<double>::infinity();
    Point3 hit_closest;
    for (int i = 0; i < static_cast<int>(s.size()); ++i) {
      if (i == target || s[i].collected) continue;
      Point3 c;
      if (segment_distance(a, b, s[i].center, &c) < s[i].radius + 0.5) {
        const double u = distance(a, c);
        if (u < hit_u) {
          hit_u = u;
          hit = i;
          hit_closest = c;
        }
      }
    }
    if (hit < 0 || depth >= 4) {
      out.push_back(b);
      return;
    }
    const Point3 center = s[hit].center;
    const Point3 along = normalized(b - a);
    Point3 side = hit_closest - center;
    side = norm(side) > 1e-6 ? normalized(side) : any_perpendicular(along);
    const Point3 other = normalized(cross(along, side));
    for (const Point3& dir : {side, other, other * -1.0, side * -1.0}) {
      Point3 wp = center + dir * (s[hit].radius + 1.3);
      const double limit = eye_.retina_radius - 1.5;
      if (norm(wp) > limit) wp = wp * (limit / norm(wp));
      if (!blocked(wp, target, 0.3)) {
        route(a, wp, target, depth + 1, out);
        route(wp, b, target, depth + 1, out);
        return;
      }
    }
    out.push_back(b);
  }

  void navigation() {
    while (!done()) {
      const auto& spheres = nav().spheres;
      int target = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < static_cast<int>(spheres.size()); ++i) {
        if (!spheres[i].collected && distance(tip_, spheres[i].center) < best) {
          best = distance(tip_, spheres[i].center);
          target = i;
        }
      }
      const Point3 goal = spheres[target].center;
      auto collected = [&] { return nav().spheres[target].collected; };

      std::vector<Point3> path;
      if (rng_.uniform() < p_.caution) {
        route(tip_, goal, target, 0, path);
      } else {
        path.push_back(goal);
      }
      Point3 from = tip_;
      for (const auto& wp : path) {
        if (done() || collected()) break;
        from = tip_;
        move_to(wp, reach_speed(), collected);
      }
      // Hasty arrivals carry past the center before settling back.
      const double overshoot = (1.0 - p_.caution) * learn_ * rng_.uniform(0.0, 3.5);
      if (overshoot > 0.0 && !done() && !collected() && distance(from, goal) > 1e-6) {
        Point3 past = goal + normalized(goal - from) * overshoot;
        const double limit = eye_.retina_radius - 1.0;
        if (norm(past - eye_.center) > limit) past = eye_.center + normalized(past - eye_.center) * limit;
        move_to(past, reach_speed());
        move_to(goal, 0.5 * reach_speed(), collected);
      }
      while (!done() && !collected()) {
        if (reckless_now(0.15)) {
          jab();
          move_to(goal, reach_speed(), collected);
        }
        frame();
      }
      pause(1000);
    }
  }

  // ---------------------------------------------------------------- Tremor

  void tremor() {
    const auto& tr = [&]() -> const TremorState& { return std::get<TremorState>(state_.task); };
    move_to(tr().target_center(), reach_speed(), [&] { return tr().engaged; });
    pause(300);
    const double pursuit = kPursuitSpeed * speed_;
    while (!done()) {
      if (reckless_now(0.05)) jab();
      const Point3 d = tr().target_center() - tip_;
      const double dist = norm(d);
      const double step = pursuit * kFrameMs / 1000.0;
      tip_ = dist <= step ? tr().target_center() : tip_ + d * (step / dist);
      frame();
    }
  }

  // --------------------------------------------------------------- Peeling

  void peeling() {
    const auto& peel = [&]() -> const PeelingState& { return std::get<PeelingState>(state_.task); };
    const TaskConfig& cfg = state_.config;
    const int per_grasp = p_.grasp_strategy == GraspStrategy::FewLargePulls ? 5 : 2;
    while (!done()) {
      int target = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < static_cast<int>(peel().patches.size()); ++i) {
        if (peel().patches[i].attached && peel().eligible(i) && distance(tip_, peel().patches[i].center) < best) {
          best = distance(tip_, peel().patches[i].center);
          target = i;
        }
      }
      const Point3 patch = peel().patches[target].center;
      const Point3 inward = normalized(eye_.center - patch);
      const double clearance = std::min(0.8, 0.45 + 0.2 * p_.caution + noise_sd_);
      const Point3 above = patch + inward * 2.5;
      const Point3 hover = patch + inward * clearance;

      move_to(above, reach_speed());
      move_to(hover, 0.5 * reach_speed());
      if (rng_.bernoulli(std::min(1.0, p_.recklessness * learn_))) {
        move_to(patch - inward * 0.3, reach_speed());
        hold(60);
        move_to(hover, 0.5 * reach_speed());
      }
      pause(350);
      grip_ = true;
      frame();
      const double pull = cfg.pull_threshold_mm * (per_grasp + rng_.uniform(0.2, 0.8));
      move_to(hover + inward * pull, kPullSpeed * speed_);
      grip_ = false;
      frame();
      pause(250);
    }
  }

  // ----------------------------------------------------------------- Laser

  const LaserState& las() const { return std::get<LaserState>(state_.task); }

  /// Probe tip on the trocar chord, far enough from the retina to avoid contact.
  Point3 probe_for(const Point3& aim) const {
    const Point3 back = normalized(rig_.trocar_right - aim);
    const double cos_inc = std::max(0.3, dot(back, normalized(eye_.center - aim)));
    return aim + back * (std::max(0.6, 0.45 / cos_inc) + 2.5 * noise_sd_);
  }

  void laser() {
    const TaskConfig& cfg = state_.config;
    const double row_width = (cfg.break_outer_mm - cfg.break_inner_mm) / cfg.coverage_rows;
    std::vector<bool> visited(las().breaks.size(), false);
    while (!done()) {
      int b = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < static_cast<int>(las().breaks.size()); ++i) {
        if (!visited[i] && !las().breaks[i].treated && distance(tip_, las().breaks[i].center) < best) {
          best = distance(tip_, las().breaks[i].center);
          b = i;
        }
      }
      if (b < 0) {
        std::fill(visited.begin(), visited.end(), false);
        continue;
      }
      visited[b] = true;
      const TangentFrame frame_b = las().breaks[b].frame;
      auto treated = [&] { return las().breaks[b].treated; };

      for (int row = 0; row < cfg.coverage_rows && !treated(); ++row) {
        const double radius = cfg.break_inner_mm + (row + 0.5) * row_width;
        const double start = rng_.uniform(0.0, 2.0 * kPi);
        move_to(probe_for(surface_point_at(eye_, frame_b, radius, start)), reach_speed());
        pause(200);
        grip_ = true;
        double heading = start;
        double offset = 0.0;
        double biased_radius = -1.0;
        std::int64_t segment_end = t_;
        const Point3 start_aim = surface_point_at(eye_, frame_b, radius, start);
        const double spot_r = cfg.spot_base_radius_mm + cfg.spot_growth_per_mm * distance(probe_for(start_aim), start_aim);
        const double dose = std::pow(cfg.spot_base_radius_mm / spot_r, 2);
        const double sweep = p_.speed_factor * 2.0 * spot_r * dose / kSweepOverlap / (cfg.repeat_interval_ms / 1000.0);
        while (heading < start + 2.0 * kPi + 0.2 && !treated() && !done()) {
          if (t_ >= segment_end) {
            segment_end = t_ + cfg.repeat_interval_ms;
            biased_radius = rng_.bernoulli(p_.center_bias) ? rng_.uniform(0.0, 0.8 * cfg.break_inner_mm) : -1.0;
          }
          const double a = std::exp(-static_cast<double>(kFrameMs) / 300.0);
          offset = offset * a + rng_.normal(0, p_.aim_sd_mm * learn_ * std::sqrt(1 - a * a));
          const double r = biased_radius >= 0.0 ? biased_radius : std::max(0.05, radius + offset);
          tip_ = probe_for(surface_point_at(eye_, frame_b, r, heading));
          frame();
          heading += sweep * kFrameMs / 1000.0 / radius;
        }
        grip_ = false;
        frame();
      }

      // Touch up whatever the sweeps left under threshold.
      for (int pass = 0; pass < 6 && !treated() && !done(); ++pass) {
        const auto cells = las().breaks[b].cells;
        for (const auto& c : cells) {
          if (treated() || done()) break;
          if (c.accumulated >= cfg.treat_threshold) continue;
          const Point3 aim_dir = Point3{rng_.normal(0, p_.aim_sd_mm * learn_), rng_.normal(0, p_.aim_sd_mm * learn_), 0};
          const Point3 aim = c.center + frame_b.e1 * aim_dir.x + frame_b.e2 * aim_dir.y;
          move_to(probe_for(eye_.center + normalized(aim - eye_.center) * eye_.retina_radius), reach_speed());
          hold(60);
          grip_ = true;
          frame();
          grip_ = false;
          frame();
        }
      }
      pause(400);
    }
  }

  SkillProfile p_;
  double learn_;
  double noise_sd_ = 0.0;
  double speed_ = 1.0;
  TaskState state_;
  EyeModel eye_;
  TrocarRig rig_;
  SessionLog log_;
  Rng rng_;
  std::int64_t t_ = 0;
  std::int64_t max_ms_;
  Point3 tip_;
  Point3 ou_;
  bool grip_ = false;
};

}  // namespace

void SkillProfile::validate() const {
  check_range(tremor_sd_mm, 0.0, 3.0, "tremor_sd_mm");
  check_range(speed_factor, 0.0, 3.0, "speed_factor", true);
  check_range(caution, 0.0, 1.0, "caution");
  check_range(recklessness, 0.0, 1.0, "recklessness");
  check_range(aim_sd_mm, 0.0, 2.0, "aim_sd_mm");
  check_range(center_bias, 0.0, 1.0, "center_bias");
}

SkillProfile SkillProfile::novice() {
  SkillProfile p;
  p.tremor_sd_mm = 0.35;
  p.speed_factor = 0.9;
  p.caution = 0.3;
  p.recklessness = 0.35;
  p.grasp_strategy = GraspStrategy::FewLargePulls;
  p.aim_sd_mm = 0.15;
  p.center_bias = 0.15;
  return p;
}

SkillProfile SkillProfile::expert() {
  SkillProfile p;
  p.tremor_sd_mm = 0.2;
  p.speed_factor = 1.0;
  p.caution = 0.8;
  p.recklessness = 0.04;
  p.grasp_strategy = GraspStrategy::FewLargePulls;
  p.aim_sd_mm = 0.05;
  p.center_bias = 0.0;
  return p;
}

SkillProfile SkillProfile::ideal() {
  SkillProfile p;
  p.caution = 1.0;
  return p;
}

SkillProfile profile_by_name(std::string_view name) {
  if (name == "novice") return SkillProfile::novice();
  if (name == "expert") return SkillProfile::expert();
  if (name == "ideal") return SkillProfile::ideal();
  throw Error(ErrorCode::InvalidConfig, "unknown profile '" + std::string(name) + "'");
}

nlohmann::json to_json(const SkillProfile& p) {
  return {{"tremor_sd_mm", p.tremor_sd_mm},
          {"speed_factor", p.speed_factor},
          {"caution", p.caution},
          {"recklessness", p.recklessness},
          {"grasp_strategy", p.grasp_strategy == GraspStrategy::FewLargePulls ? "few_large_pulls" : "many_small_pulls"},
          {"aim_sd_mm", p.aim_sd_mm},
          {"center_bias", p.center_bias}};
}

GeneratedSession generate(TaskKind kind, const SkillProfile& profile, std::uint64_t seed, int run_index,
                          const ParticipantMeta& participant, const TaskConfig& config, double max_seconds) {
  ParticipantMeta meta = participant;
  meta.run_index = run_index;
  return Operator(kind, profile, seed, run_index, meta, config, max_seconds).run();
}

SessionLog generate_session(TaskKind kind, const SkillProfile& profile, std::uint64_t seed, int run_index) {
  return generate(kind, profile, seed, run_index).log;
}

std::uint64_t session_seed(std::uint64_t base, int participant, int run_index) {
  return base + 1000 * static_cast<std::uint64_t>(participant) + static_cast<std::uint64_t>(run_index);
}

ParticipantMeta synthetic_participant(Group group, int index, std::uint64_t seed, const std::string& id_prefix) {
  Rng rng(mix(seed ^ mix(0x5eed0000ULL + static_cast<std::uint64_t>(index))));
  ParticipantMeta m;
  char id[32];
  std::snprintf(id, sizeof id, "%s%02d", id_prefix.c_str(), index + 1);
  m.participant_id = id;
  m.group = group;
  if (group == Group::Novice) {
    m.age = std::floor(rng.uniform(22.0, 31.0));
    m.sex = rng.bernoulli(0.7) ? Sex::Female : Sex::Male;
  } else {
    m.age = std::floor(rng.uniform(35.0, 61.0));
    m.sex = rng.bernoulli(0.3) ? Sex::Female : Sex::Male;
  }
  return m;
}

std::vector<GeneratedSession> synthesize_cohort(const CohortOptions& o) {
  if (o.participants < 1 || o.runs < 1) throw Error(ErrorCode::InvalidConfig, "cohort needs participants and runs");
  std::vector<GeneratedSession> out;
  for (int i = 0; i < o.participants; ++i) {
    const ParticipantMeta meta = synthetic_participant(o.group, i, o.seed, o.id_prefix);
    for (int run = 1; run <= o.runs; ++run) {
      for (TaskKind kind : o.modules) {
        out.push_back(generate(kind, o.profile, session_seed(o.seed, i, run), run, meta, o.config));
      }
    }
  }
  return out;
}

}  // namespace retinavr
