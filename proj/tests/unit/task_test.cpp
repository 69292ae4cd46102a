#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <set>

#include "doctest.h"
#include "retinavr/error.hpp"
#include "retinavr/rng.hpp"
#include "retinavr/task.hpp"
#include "task_driver.hpp"

using namespace retinavr;
using retinavr::testing::TipDriver;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoError;
}

Point3 hover_above(const Point3& surface, const EyeModel& eye, double clearance) {
  return surface + normalized(eye.center - surface) * clearance;
}

/// Probe tip on the chord from the trocar to `target`, `standoff` mm short of it.
Point3 aim_at(const Point3& target, const TaskConfig& cfg, double standoff) {
  const Point3 trocar = cfg.rig().trocar_right;
  return target + normalized(trocar - target) * standoff;
}

}  // namespace

TEST_CASE("init_task layouts") {
  const TaskConfig cfg;
  SUBCASE("navigation is deterministic per seed") {
    const TaskState a = init_task(TaskKind::Navigation, cfg, 42);
    const TaskState b = init_task(TaskKind::Navigation, cfg, 42);
    const auto& sa = std::get<NavigationState>(a.task).spheres;
    const auto& sb = std::get<NavigationState>(b.task).spheres;
    REQUIRE(sa.size() == 10);
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].center == sb[i].center);
    CHECK(a.layout_hash == b.layout_hash);
    CHECK(init_task(TaskKind::Navigation, cfg, 43).layout_hash != a.layout_hash);
  }
  SUBCASE("navigation spacing and depth hold for many seeds") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const TaskState state = init_task(TaskKind::Navigation, cfg, seed);
      const auto& spheres = std::get<NavigationState>(state.task).spheres;
      REQUIRE(spheres.size() == 10);
      double min_pair = 1e9;
      for (std::size_t i = 0; i < spheres.size(); ++i) {
        const double depth = norm(spheres[i].center);
        CHECK(depth >= 2.0);
        CHECK(depth <= 10.0);
        for (std::size_t j = i + 1; j < spheres.size(); ++j)
          min_pair = std::min(min_pair, distance(spheres[i].center, spheres[j].center));
      }
      CHECK(min_pair >= 4.0);
    }
  }
  SUBCASE("laser has five breaks of 48 untreated cells") {
    const TaskState state = init_task(TaskKind::Laser, cfg, 1);
    const auto& laser = std::get<LaserState>(state.task);
    REQUIRE(laser.breaks.size() == 5);
    const EyeModel eye = cfg.eye();
    for (const auto& b : laser.breaks) {
      CHECK(b.cells.size() == 48);
      CHECK_FALSE(b.treated);
      for (const auto& c : b.cells) {
        CHECK(c.accumulated == 0.0);
        const double d = geodesic_distance_mm(c.center, b.center, eye);
        CHECK(d > b.r_in);
        CHECK(d < b.r_out);
      }
    }
  }
  SUBCASE("peeling has a 4 x 12 membrane") {
    const TaskState state = init_task(TaskKind::Peeling, cfg, 1);
    const auto& peel = std::get<PeelingState>(state.task);
    CHECK(peel.patches.size() == 48);
    CHECK(peel.neighbors(peel.index(0, 0)).size() == 3);
    CHECK(peel.neighbors(peel.index(1, 5)).size() == 4);
  }
  SUBCASE("tremor arc") {
    const TaskState state = init_task(TaskKind::Tremor, cfg, 1);
    const auto& tremor = std::get<TremorState>(state.task);
    const double expected = 10.5 * std::sin(std::numbers::pi / 3.0) * std::numbers::pi;
    CHECK(tremor.path.length() == doctest::Approx(expected));
    CHECK(tremor.path.distance_to(tremor.path.point_at(7.0)) < 1e-12);
  }
  SUBCASE("errors") {
    TaskConfig crowded;
    crowded.sphere_min_separation_mm = 15.0;
    crowded.placement_attempts = 2000;
    CHECK(code_of([&] { init_task(TaskKind::Navigation, crowded, 1); }) == ErrorCode::SeedPlacementFailure);
    TaskConfig bad;
    bad.break_outer_mm = 0.5;
    CHECK(code_of([&] { init_task(TaskKind::Laser, bad, 1); }) == ErrorCode::InvalidConfig);
  }
}

TEST_CASE("tick guards and stationary input") {
  TipDriver d{init_task(TaskKind::Navigation, TaskConfig{}, 42), {}};
  const EyeModel eye = d.state.config.eye();
  d.step(0, eye.center);
  const NavigationState before = std::get<NavigationState>(d.state.task);
  for (int t = 10; t <= 500; t += 10) CHECK(d.step(t, eye.center).empty());
  const NavigationState& after = std::get<NavigationState>(d.state.task);
  CHECK(d.state.elapsed_ms == 500);
  CHECK(after.exits == before.exits);
  CHECK(after.active_contact == before.active_contact);
  CHECK(after.collected_count() == 0);
  CHECK(d.state.touch.touch_count == 0);

  CHECK(code_of([&] { d.step(500, eye.center); }) == ErrorCode::NonMonotonicTimestamp);
  CHECK(code_of([&] { d.step(400, eye.center); }) == ErrorCode::NonMonotonicTimestamp);
  CHECK(d.state.elapsed_ms == 500);
}

TEST_CASE("navigation dwell") {
  const TaskConfig cfg;
  TipDriver d{init_task(TaskKind::Navigation, cfg, 7), {}};
  const EyeModel eye = cfg.eye();
  const auto& nav = [&]() -> const NavigationState& { return std::get<NavigationState>(d.state.task); };
  const Point3 s0 = nav().spheres[0].center;

  SUBCASE("2000 ms of contact collects") {
    d.step(0, eye.center);
    for (int t = 100; t < 2100; t += 10) d.step(t, s0);
    CHECK_FALSE(nav().spheres[0].collected);
    CHECK(nav().dwell_ms == 1990);
    const EventList ev = d.step(2100, s0);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].type == EventType::SphereCollected);
    CHECK(ev[0].index == 0);
    CHECK(nav().spheres[0].collected);
    CHECK(nav().spheres[0].exits == 0);
  }
  SUBCASE("1990 ms then exit resets dwell") {
    d.step(0, eye.center);
    for (int t = 100; t <= 2090; t += 10) d.step(t, s0);
    CHECK(nav().dwell_ms == 1990);
    const EventList ev = d.step(2100, eye.center);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].type == EventType::SphereExited);
    CHECK(nav().exits == 1);
    CHECK(nav().dwell_ms == 0);
    CHECK_FALSE(nav().spheres[0].collected);
  }
  SUBCASE("four 500 ms episodes are four exits") {
    std::int64_t t = 0;
    d.step(t, eye.center);
    for (int episode = 0; episode < 4; ++episode) {
      for (int k = 0; k <= 50; ++k) d.step(t += 10, s0);
      d.step(t += 10, eye.center);
    }
    CHECK(nav().spheres[0].exits == 4);
    CHECK_FALSE(nav().spheres[0].collected);
  }
}

TEST_CASE("navigation exits match an offline episode segmentation") {
  const TaskConfig cfg;
  const EyeModel eye = cfg.eye();
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    TipDriver d{init_task(TaskKind::Navigation, cfg, 1000 + trial), {}};
    const Point3 target = std::get<NavigationState>(d.state.task).spheres[3].center;
    std::vector<std::pair<std::int64_t, bool>> frames;
    std::int64_t t = 0;
    bool contact = false;
    for (int i = 0; i < 600; ++i) {
      if (rng.bernoulli(contact ? 0.01 : 0.05)) contact = !contact;
      frames.emplace_back(t, contact);
      t += 5 + static_cast<std::int64_t>(rng.uniform() * 30.0);
    }
    for (const auto& [ft, c] : frames) d.step(ft, c ? target : eye.center);

    // Oracle: split into maximal contact runs.
    int exits = 0;
    bool collected = false;
    for (std::size_t i = 0; i < frames.size() && !collected;) {
      if (!frames[i].second) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j + 1 < frames.size() && frames[j + 1].second) ++j;
      if (frames[j].first - frames[i].first >= 2000) {
        collected = true;
      } else if (j + 1 < frames.size()) {
        ++exits;
      }
      i = j + 1;
    }
    const auto& nav = std::get<NavigationState>(d.state.task);
    CHECK(nav.spheres[3].collected == collected);
    CHECK(nav.exits == exits);
    const int in_progress = nav.active_contact ? 1 : 0;
    CHECK(nav.contact_episodes == nav.exits + nav.collected_count() + in_progress);
  }
}

TEST_CASE("tremor tracking") {
  SUBCASE("perfect tracking of a 60 mm path takes 6 s") {
    TaskConfig cfg;
    cfg.path_polar_deg = 90.0;
    cfg.path_arc_deg = 60.0 / 10.5 * 180.0 / std::numbers::pi;
    TipDriver d{init_task(TaskKind::Tremor, cfg, 1), {}};
    const auto& tremor = [&]() -> const TremorState& { return std::get<TremorState>(d.state.task); };
    CHECK(tremor().path.length() == doctest::Approx(60.0).epsilon(1e-12));
    // 25 ms ticks advance exactly 0.25 mm each.
    for (std::int64_t t = 0; !d.state.completed; t += 25) d.step(t, tremor().target_center());
    CHECK(d.state.elapsed_ms == 6000);
    CHECK(finalize_metrics(d.state).completion_time_s == 6.0);
    CHECK(tremor().exits == 0);
  }
  SUBCASE("no contact, no progress") {
    TipDriver d{init_task(TaskKind::Tremor, TaskConfig{}, 1), {}};
    for (std::int64_t t = 0; t < 5000; t += 11) d.step(t, Point3{});
    CHECK(std::get<TremorState>(d.state.task).s_mm == 0.0);
    CHECK_FALSE(d.state.completed);
  }
  SUBCASE("deviation statistics match a time-weighted oracle") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
      TipDriver d{init_task(TaskKind::Tremor, TaskConfig{}, 1), {}};
      const auto& tremor = [&]() -> const TremorState& { return std::get<TremorState>(d.state.task); };
      double weighted = 0.0, total = 0.0, max_dev = 0.0;
      std::int64_t t = 0;
      double contact_ms = 0.0;
      for (int i = 0; i < 400 && !d.state.completed; ++i) {
        const double offset = rng.uniform(-1.0, 1.0);
        const std::int64_t dt = i == 0 ? 0 : 3 + static_cast<std::int64_t>(rng.uniform() * 20.0);
        t += dt;
        const TremorState before = tremor();
        d.step(t, before.target_center() + before.path.normal * offset);
        weighted += std::abs(offset) * static_cast<double>(dt);
        total += static_cast<double>(dt);
        max_dev = std::max(max_dev, std::abs(offset));
        contact_ms += static_cast<double>(dt);
        CHECK(tremor().s_mm >= before.s_mm);
      }
      CHECK(std::abs(tremor().mean_dev_mm() - weighted / total) <= 1e-9);
      CHECK(std::abs(tremor().max_dev_mm - max_dev) <= 1e-9);
      CHECK(tremor().mean_dev_mm() <= tremor().max_dev_mm);
      CHECK(tremor().s_mm == doctest::Approx(std::min(tremor().path.length(), 10.0 * contact_ms / 1000.0)));
    }
  }
  SUBCASE("losing contact counts an exit and halts the target") {
    TipDriver d{init_task(TaskKind::Tremor, TaskConfig{}, 1), {}};
    const auto& tremor = [&]() -> const TremorState& { return std::get<TremorState>(d.state.task); };
    d.step(0, Point3{});
    d.step(20, tremor().target_center());
    d.step(40, tremor().target_center());
    const double s = tremor().s_mm;
    CHECK(s == doctest::Approx(0.4));
    const EventList ev = d.step(60, Point3{});
    CHECK(ev.size() == 1);
    CHECK(tremor().exits == 1);
    d.step(80, Point3{});
    CHECK(tremor().s_mm == s);
    CHECK(tremor().exits == 1);
  }
}

TEST_CASE("peeling rules") {
  const TaskConfig cfg;
  const EyeModel eye = cfg.eye();
  TipDriver d{init_task(TaskKind::Peeling, cfg, 1), {}};
  const auto& peel = [&]() -> const PeelingState& { return std::get<PeelingState>(d.state.task); };
  auto pull = [&](std::int64_t& t, int patch, double dist, bool release = true) {
    const Point3 start = hover_above(peel().patches[patch].center, eye, 0.3);
    const Point3 dir = normalized(eye.center - start);
    d.step(t += 10, start, false);
    d.step(t += 10, start, true);
    for (double s = 0.1; s <= dist + 1e-9; s += 0.1) d.step(t += 10, start + dir * s, true);
    if (release) d.step(t += 10, start + dir * dist, false);
  };

  std::int64_t t = 0;
  d.step(t, Point3{});
  SUBCASE("interior first grasp cannot peel") {
    pull(t, peel().index(1, 4), 3.0);
    CHECK(peel().grasps == 1);
    CHECK(peel().detached_count() == 0);
  }
  SUBCASE("outer ring grasp peels one patch per threshold") {
    const int outer = peel().index(3, 2);
    pull(t, outer, 0.8);
    CHECK(peel().grasps == 1);
    CHECK(peel().detached_count() == 1);
    CHECK_FALSE(peel().patches[outer].attached);
    pull(t, peel().index(3, 3), 2.45);
    CHECK(peel().grasps == 2);
    CHECK(peel().detached_count() == 4);
  }
  SUBCASE("grasp far from the membrane is not counted") {
    d.step(t += 10, Point3{0, 0, -5}, true);
    d.step(t += 10, Point3{0, 0, -3}, true);
    CHECK(peel().grasps == 0);
    CHECK(peel().detached_count() == 0);
  }
}

TEST_CASE("peeling detachments follow graph reachability") {
  const TaskConfig cfg;
  const EyeModel eye = cfg.eye();
  Rng rng(5150);
  for (int trial = 0; trial < 200; ++trial) {
    TipDriver d{init_task(TaskKind::Peeling, cfg, 1), {}};
    const auto peel = [&]() -> const PeelingState& { return std::get<PeelingState>(d.state.task); };
    std::int64_t t = 0;
    d.step(t, Point3{});
    for (int g = 0; g < 15 && !d.state.completed; ++g) {
      const int patch = static_cast<int>(rng.uniform() * 48.0);
      const Point3 start = hover_above(peel().patches[patch].center, eye, rng.uniform(0.2, 0.9));
      const Point3 dir = normalized(eye.center - start + Point3{rng.normal(0, 0.3), rng.normal(0, 0.3), 0});
      const double dist = rng.uniform(0.0, 4.0);
      d.step(t += 12, start, false);
      for (double s = 0.0; s <= dist && !d.state.completed; s += 0.15) d.step(t += 12, start + dir * s, true);
      if (!d.state.completed) d.step(t += 12, start + dir * dist, false);
    }

    // Each detachment must be border-adjacent at the moment it happened.
    PeelingState replay = std::get<PeelingState>(init_task(TaskKind::Peeling, cfg, 1).task);
    for (const auto& e : d.events) {
      if (e.type != EventType::PatchDetached) continue;
      CHECK(replay.eligible(e.index));
      replay.patches[e.index].attached = false;
    }
    // BFS from detached outer-ring patches through detached patches.
    const PeelingState& final_state = peel();
    std::set<int> reached;
    std::deque<int> queue;
    for (int i = 0; i < 48; ++i) {
      if (!final_state.patches[i].attached && final_state.patches[i].ring == final_state.rings - 1) {
        reached.insert(i);
        queue.push_back(i);
      }
    }
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      for (int nb : final_state.neighbors(i)) {
        if (!final_state.patches[nb].attached && reached.insert(nb).second) queue.push_back(nb);
      }
    }
    std::set<int> detached;
    for (int i = 0; i < 48; ++i)
      if (!final_state.patches[i].attached) detached.insert(i);
    CHECK(reached == detached);
    for (int i = 0; i < 48; ++i) CHECK(replay.patches[i].attached == final_state.patches[i].attached);
  }
}

TEST_CASE("laser spots") {
  const TaskConfig cfg;
  const EyeModel eye = cfg.eye();
  SUBCASE("probe at the retina gives the base spot") {
    TipDriver d{init_task(TaskKind::Laser, cfg, 1), {}};
    const Point3 target = eye.posterior_pole();
    d.step(0, aim_at(target, cfg, 1e-7), true);
    const auto& laser = std::get<LaserState>(d.state.task);
    REQUIRE(laser.spots.size() == 1);
    CHECK(laser.spots[0].radius == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(laser.spots[0].intensity == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(distance(laser.spots[0].position, target) < 1e-6);
  }
  SUBCASE("spot size grows and intensity falls with distance") {
    TipDriver d{init_task(TaskKind::Laser, cfg, 1), {}};
    d.step(0, aim_at(eye.posterior_pole(), cfg, 2.0), true);
    const auto& spot = std::get<LaserState>(d.state.task).spots.at(0);
    CHECK(spot.radius == doctest::Approx(0.6));
    CHECK(spot.intensity == doctest::Approx(0.25));
  }
  SUBCASE("holding the grip for 1000 ms fires six spots") {
    TipDriver d{init_task(TaskKind::Laser, cfg, 1), {}};
    const Point3 tip = aim_at(eye.posterior_pole(), cfg, 1.0);
    for (std::int64_t t = 0; t <= 1000; t += 10) d.step(t, tip, true);
    d.step(1010, tip, false);
    CHECK(d.count(EventType::SpotFired) == 6);
  }
  SUBCASE("repeat count is 1 + floor(H / 200) for random holds") {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      TipDriver d{init_task(TaskKind::Laser, cfg, 1), {}};
      const Point3 tip = aim_at(eye.posterior_pole(), cfg, 1.0);
      std::int64_t t = 0;
      d.step(t, tip, false);
      t += 1 + static_cast<std::int64_t>(rng.uniform() * 50.0);
      const std::int64_t press = t;
      const int ticks = static_cast<int>(rng.uniform() * 150.0);
      std::int64_t last_held = press;
      d.step(t, tip, true);
      for (int i = 0; i < ticks; ++i) {
        t += 1 + static_cast<std::int64_t>(rng.uniform() * 60.0);
        d.step(t, tip, true);
        last_held = t;
      }
      d.step(t + 5, tip, false);
      CHECK(d.count(EventType::SpotFired) == 1 + (last_held - press) / 200);
    }
  }
  SUBCASE("a probe resting on the retina fires a dud") {
    TipDriver d{init_task(TaskKind::Laser, cfg, 1), {}};
    d.step(0, Point3{0, 0, -15}, true);  // clamped onto the surface
    CHECK(d.count(EventType::ShotMissed) == 1);
    CHECK(std::get<LaserState>(d.state.task).spots.empty());
    CHECK(d.state.touch.touch_count == 1);
  }
  SUBCASE("48 full-intensity shots on the cell centers treat a break") {
    LaserState laser = std::get<LaserState>(init_task(TaskKind::Laser, cfg, 1).task);
    RetinalBreak& brk = laser.breaks[2];
    const std::vector<CoverageCell> cells = brk.cells;
    bool treated = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      CHECK_FALSE(brk.treated);
      treated = deposit_spot(brk, LaserSpot{cells[i].center, 0.3, 1.0, 0}, eye, cfg.treat_threshold);
    }
    CHECK(treated);
    CHECK(brk.treated);
  }
}

TEST_CASE("laser task completes and reports spot coordinates") {
  const TaskConfig cfg;
  TipDriver d{init_task(TaskKind::Laser, cfg, 1), {}};
  std::int64_t t = 0;
  d.step(t, Point3{});
  const auto breaks = std::get<LaserState>(d.state.task).breaks;
  for (const auto& b : breaks) {
    for (const auto& c : b.cells) {
      if (d.state.completed) break;
      // Two shots per cell: one at 0.05 mm standoff leaves the cell just short of threshold.
      for (int shot = 0; shot < 2 && !d.state.completed; ++shot) {
        d.step(t += 20, aim_at(c.center, cfg, 0.05), true);
        if (!d.state.completed) d.step(t += 20, Point3{}, false);
      }
    }
  }
  REQUIRE(d.state.completed);
  CHECK(d.count(EventType::BreakTreated) == 5);
  const MetricsReport r = finalize_metrics(d.state);
  CHECK(r.laser_spots == d.count(EventType::SpotFired));
  CHECK(r.laser_spots <= 480);
  CHECK(r.laser_spots > 240);
  CHECK(r.spots.size() == static_cast<std::size_t>(r.laser_spots));
  CHECK(std::all_of(r.per_break_treated.begin(), r.per_break_treated.end(), [](bool b) { return b; }));
  for (const auto& s : r.spots) {
    CHECK(s.geodesic_mm > 1.0);
    CHECK(s.geodesic_mm < 2.2);
    CHECK(std::hypot(s.local_x_mm, s.local_y_mm) == doctest::Approx(12.0 * std::tan(s.geodesic_mm / 12.0)));
  }
  CHECK(code_of([&] { d.step(t + 10, Point3{}); }) == ErrorCode::TaskAlreadyComplete);
}

TEST_CASE("finalize_metrics") {
  const TaskConfig cfg;
  const EyeModel eye = cfg.eye();
  SUBCASE("completed navigation reports seconds") {
    TipDriver d{init_task(TaskKind::Navigation, cfg, 3), {}};
    const auto spheres = std::get<NavigationState>(d.state.task).spheres;
    d.step(0, eye.center);
    // The tenth contact starts at 47860 ms and completes its dwell at 49860 ms.
    std::int64_t t = 47860 - 9 * 2100;
    for (std::size_t i = 0; i < spheres.size(); ++i) {
      d.step(t, spheres[i].center);
      d.step(t + 2000, spheres[i].center);
      if (i + 1 < spheres.size()) d.step(t + 2050, eye.center);
      t += 2100;
    }
    REQUIRE(d.state.completed);
    const MetricsReport r = finalize_metrics(d.state);
    CHECK(r.completion_time_s == 49.86);
    CHECK(r.sphere_exits == 0);
    CHECK(r.retinal_touches == d.state.touch.touch_count);
    const auto values = r.values();
    REQUIRE(values.size() == 3);
    CHECK(values[0].name == "efficiency");
    CHECK(values[2].name == "sphere_exits");
  }
  SUBCASE("fresh task force-finalized") {
    for (TaskKind k : kAllTasks) {
      const TaskState s = init_task(k, cfg, 1);
      CHECK(code_of([&] { finalize_metrics(s); }) == ErrorCode::TaskNotComplete);
      const MetricsReport r = finalize_metrics(s, true);
      CHECK_FALSE(r.completed);
      for (const auto& v : r.values()) CHECK(v.value == 0.0);
      CHECK(r.values().size() == metric_names(k).size());
    }
  }
  SUBCASE("json round trip") {
    TipDriver d{init_task(TaskKind::Laser, cfg, 1), {}};
    d.step(0, aim_at(eye.posterior_pole(), cfg, 0.7), true);
    const MetricsReport r = finalize_metrics(d.state, true);
    CHECK(metrics_from_json(to_json(r)) == r);
    for (const auto& e : d.events) CHECK(event_from_json(to_json(e)) == e);
  }
}

TEST_CASE("magnification toggles on the X button rising edge") {
  TaskState s = init_task(TaskKind::Peeling, TaskConfig{}, 1);
  TickInput in;
  int toggles = 0;
  for (int i = 0; i < 10; ++i) {
    in.t_ms = i * 10;
    in.button_x_left = (i >= 2 && i < 5) || i >= 7;
    for (const auto& e : advance(s, in)) toggles += e.type == EventType::MagnificationToggled ? 1 : 0;
  }
  CHECK(toggles == 2);
  CHECK_FALSE(s.magnified);
}

TEST_CASE("identical inputs give identical events and metrics") {
  const TaskConfig cfg;
  Rng rng(1);
  std::vector<TickInput> inputs;
  for (int i = 0; i < 3000; ++i) {
    TickInput in;
    in.t_ms = i * 11;
    in.right_pose.position = Point3{rng.normal(0, 6), rng.normal(0, 6), rng.normal(0, 6)};
    in.grip_right = rng.bernoulli(0.3);
    in.joystick_right = {rng.uniform(-1, 1) * 0.2, 0.0};
    inputs.push_back(in);
  }
  for (TaskKind k : kAllTasks) {
    TaskState a = init_task(k, cfg, 9), b = init_task(k, cfg, 9);
    EventList ea, eb;
    for (const auto& in : inputs) {
      if (a.completed) break;
      auto x = advance(a, in);
      auto y = advance(b, in);
      ea.insert(ea.end(), x.begin(), x.end());
      eb.insert(eb.end(), y.begin(), y.end());
    }
    CHECK(ea == eb);
    CHECK(finalize_metrics(a, true) == finalize_metrics(b, true));
  }
}
