#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "retinavr/error.hpp"
#include "retinavr/geom.hpp"
#include "retinavr/rng.hpp"

using namespace retinavr;

namespace {

Point3 random_unit(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double rho = std::sqrt(1.0 - z * z);
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

Point3 random_inside(Rng& rng, double radius) {
  return random_unit(rng) * (radius * std::cbrt(rng.uniform()));
}

UnitQuat random_rotation(Rng& rng) {
  return UnitQuat::from_axis_angle(random_unit(rng), rng.uniform(-std::numbers::pi, std::numbers::pi));
}

}  // namespace

TEST_CASE("quaternion operations stay unit norm") {
  Rng rng(7);
  UnitQuat q = UnitQuat::identity();
  for (int i = 0; i < 1000; ++i) {
    q = q * random_rotation(rng);
    CHECK(std::abs(q.norm() - 1.0) <= 1e-9);
  }
  const UnitQuat r = random_rotation(rng);
  const Point3 v{1.0, -2.0, 3.0};
  const Point3 back = r.conjugate().rotate(r.rotate(v));
  CHECK(distance(back, v) < 1e-12);
}

TEST_CASE("calibration offset round trip") {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Pose offset{random_inside(rng, 500.0), random_rotation(rng)};
    const Pose raw{random_inside(rng, 500.0), random_rotation(rng)};
    const Pose back = remove_offset(apply_offset(raw, offset), offset);
    CHECK(distance(back.position, raw.position) <= 1e-9);
    const UnitQuat diff = back.orientation * raw.orientation.conjugate();
    CHECK(std::abs(std::abs(diff.w) - 1.0) <= 1e-9);
  }
}

TEST_CASE("map_controller_pose: calibrated rest maps to the rest tip") {
  const EyeModel eye;
  const TrocarRig rig = TrocarRig::standard(eye);
  CalibrationOffset cal;
  cal.pose_offset_right = Pose{{120.0, 900.0, -40.0}, UnitQuat::from_axis_angle({0, 0, 1}, 0.3)};
  const InstrumentState s = map_controller_pose(cal.pose_offset_right, rig, cal, Hand::Right, eye);
  const Point3 axis = normalized(eye.center - rig.trocar_right);
  const Point3 rest = rig.trocar_right + axis * rig.rest_depth_mm;
  CHECK(distance(s.tip, rest) < 1e-12);
  CHECK(s.kind == InstrumentKind::Vitrector);
  CHECK(s.inside_eye);
  CHECK(distance(s.axis, axis) < 1e-12);

  const InstrumentState left = map_controller_pose(Pose{}, rig, CalibrationOffset{}, Hand::Left, eye);
  CHECK(left.kind == InstrumentKind::LightPipe);
}

TEST_CASE("map_controller_pose: lateral x motion is inverted about the fulcrum") {
  const EyeModel eye;
  TrocarRig rig = TrocarRig::standard(eye);
  rig.lateral_scale = 1.0;
  const CalibrationOffset cal;
  const InstrumentState rest = map_controller_pose(Pose{}, rig, cal, Hand::Right, eye);
  const InstrumentState moved = map_controller_pose(Pose{{1.0, 0.0, 0.0}, {}}, rig, cal, Hand::Right, eye);
  CHECK(moved.tip.x - rest.tip.x == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(moved.tip.y == doctest::Approx(rest.tip.y));
  CHECK(moved.tip.z == doctest::Approx(rest.tip.z));
}

TEST_CASE("map_controller_pose matches a per-axis scalar oracle") {
  const EyeModel eye;
  TrocarRig rig = TrocarRig::standard(eye);
  Rng rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    rig.lateral_scale = rng.uniform(0.2, 2.0);
    rig.depth_scale = rng.uniform(0.2, 2.0);
    const Hand hand = trial % 2 == 0 ? Hand::Left : Hand::Right;
    const Point3 rest_pos{rng.uniform(-300, 300), rng.uniform(600, 1200), rng.uniform(-300, 300)};
    CalibrationOffset cal;
    (hand == Hand::Left ? cal.pose_offset_left : cal.pose_offset_right) = Pose{rest_pos, {}};
    const Point3 raw = rest_pos + Point3{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};

    // Oracle: one scalar expression per axis, no vector or quaternion helpers.
    const double dx = raw.x - rest_pos.x, dy = raw.y - rest_pos.y, dz = raw.z - rest_pos.z;
    const double c45 = std::sqrt(0.5), s45 = std::sqrt(0.5);
    const double ux = dx;
    const double uy = c45 * dy - s45 * dz;
    const double uz = s45 * dy + c45 * dz;
    const Point3 tr = hand == Hand::Left ? rig.trocar_left : rig.trocar_right;
    const double len = std::sqrt(tr.x * tr.x + tr.y * tr.y + tr.z * tr.z);
    const double ax = -tr.x / len, ay = -tr.y / len, az = -tr.z / len;
    const double along = ux * ax + uy * ay + uz * az;
    const double ex = tr.x + ax * rig.rest_depth_mm + rig.depth_scale * along * ax - rig.lateral_scale * (ux - along * ax);
    const double ey = tr.y + ay * rig.rest_depth_mm + rig.depth_scale * along * ay - rig.lateral_scale * (uy - along * ay);
    const double ez = tr.z + az * rig.rest_depth_mm + rig.depth_scale * along * az - rig.lateral_scale * (uz - along * az);

    const InstrumentState s = map_controller_pose(Pose{raw, {}}, rig, cal, hand, eye);
    CHECK(std::abs(s.tip.x - ex) <= 1e-9);
    CHECK(std::abs(s.tip.y - ey) <= 1e-9);
    CHECK(std::abs(s.tip.z - ez) <= 1e-9);
  }
}

TEST_CASE("map_controller_pose is deterministic and clamps inside the globe") {
  const EyeModel eye;
  const TrocarRig rig = TrocarRig::standard(eye);
  const CalibrationOffset cal;
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const Pose raw{random_inside(rng, 200.0), random_rotation(rng)};
    const InstrumentState a = map_controller_pose(raw, rig, cal, Hand::Right, eye);
    const InstrumentState b = map_controller_pose(raw, rig, cal, Hand::Right, eye);
    CHECK(std::memcmp(&a.tip, &b.tip, sizeof(Point3)) == 0);
    CHECK(distance(a.tip, eye.center) <= eye.retina_radius + 1e-12);
    CHECK(std::abs(norm(a.axis) - 1.0) < 1e-12);
    const Point3 axis = normalized(eye.center - rig.trocar_right);
    CHECK(dot(a.tip - rig.trocar_right, axis) >= rig.min_insertion_mm - 1e-9);
  }
}

TEST_CASE("withdrawal behind the trocar is clamped and flagged") {
  const EyeModel eye;
  const TrocarRig rig = TrocarRig::standard(eye);
  const CalibrationOffset cal;
  // Pull straight out along the trocar axis (controller space is rotated by 45 degrees).
  const Point3 axis = normalized(eye.center - rig.trocar_right);
  const Point3 out_dir = ergonomic_rotation(rig).conjugate().rotate(-axis);
  const InstrumentState s = map_controller_pose(Pose{out_dir * 30.0, {}}, rig, cal, Hand::Right, eye);
  CHECK_FALSE(s.inside_eye);
  CHECK(dot(s.tip - rig.trocar_right, axis) == doctest::Approx(rig.min_insertion_mm));
}

TEST_CASE("map_controller_pose rejects bad input") {
  const EyeModel eye;
  TrocarRig rig = TrocarRig::standard(eye);
  const CalibrationOffset cal;
  Pose bad;
  bad.position.x = std::nan("");
  CHECK_THROWS_AS(map_controller_pose(bad, rig, cal, Hand::Right, eye), Error);
  rig.trocar_left = rig.trocar_right;
  try {
    map_controller_pose(Pose{}, rig, cal, Hand::Right, eye);
    FAIL("expected DegenerateRig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateRig);
  }
}

TEST_CASE("fulcrum map applied twice restores the lateral displacement") {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const Point3 axis = random_unit(rng);
    const Point3 d = random_inside(rng, 10.0);
    const Point3 twice = fulcrum_displacement(fulcrum_displacement(d, axis, 1.0, 1.0), axis, 1.0, 1.0);
    CHECK(distance(twice, d) < 1e-12);
  }
}

TEST_CASE("controller_pose_for_tip inverts the mapping") {
  EyeModel eye;
  eye.eye_rotation = UnitQuat::from_axis_angle({0.3, 1.0, 0.1}, 0.2);
  const TrocarRig rig = TrocarRig::standard(eye);
  CalibrationOffset cal;
  cal.pose_offset_right = Pose{{50.0, 800.0, 10.0}, UnitQuat::from_axis_angle({1, 1, 0}, 0.4)};
  Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    const Point3 target = random_inside(rng, 9.0);
    const Pose raw = controller_pose_for_tip(target, rig, cal, Hand::Right, eye);
    const InstrumentState s = map_controller_pose(raw, rig, cal, Hand::Right, eye);
    CHECK(distance(s.tip, target) < 1e-9);
  }
}

TEST_CASE("instrument coordinates are expressed in the rotated fundus frame") {
  EyeModel eye;
  const TrocarRig rig = TrocarRig::standard(eye);
  const CalibrationOffset cal;
  const Pose raw{{0.5, -0.7, 1.1}, {}};
  const InstrumentState world = map_controller_pose(raw, rig, cal, Hand::Right, eye);
  eye.eye_rotation = UnitQuat::from_axis_angle({0, 1, 0}, 0.5);
  const InstrumentState fundus = map_controller_pose(raw, rig, cal, Hand::Right, eye);
  CHECK(distance(fundus.tip, eye.eye_rotation.conjugate().rotate(world.tip)) < 1e-12);
}

TEST_CASE("sphere_contact uses a closed ball") {
  CHECK(sphere_contact({1, 2, 3}, {1, 2, 3}, 0.5));
  CHECK(sphere_contact({1.5, 0, 0}, {0, 0, 0}, 1.5));
  CHECK_FALSE(sphere_contact({1.5000001, 0, 0}, {0, 0, 0}, 1.5));

  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const Point3 a = random_inside(rng, 10.0);
    const Point3 b = random_inside(rng, 10.0);
    const double r = rng.uniform(0.1, 12.0);
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (std::abs(d - r) < 1e-12) continue;
    CHECK(sphere_contact(a, b, r) == (d <= r));
  }
}

TEST_CASE("retina_raycast") {
  const EyeModel eye;
  Rng rng(23);
  SUBCASE("from the center every ray travels one radius") {
    for (int i = 0; i < 50; ++i) {
      const auto hit = retina_raycast(eye.center, random_unit(rng), eye);
      REQUIRE(hit);
      CHECK(hit->distance == doctest::Approx(eye.retina_radius).epsilon(1e-14));
    }
  }
  SUBCASE("collinear case toward the pole") {
    const Point3 origin = eye.posterior_pole_dir * (eye.retina_radius / 2.0);
    const auto hit = retina_raycast(origin, eye.posterior_pole_dir, eye);
    REQUIRE(hit);
    CHECK(hit->distance == doctest::Approx(eye.retina_radius / 2.0).epsilon(1e-14));
    CHECK(distance(hit->point, eye.posterior_pole()) < 1e-12);
  }
  SUBCASE("random rays land on the sphere and on the ray") {
    for (int i = 0; i < 1000; ++i) {
      const Point3 origin = random_inside(rng, eye.retina_radius * 0.999);
      const Point3 dir = random_unit(rng);
      const auto hit = retina_raycast(origin, dir, eye);
      REQUIRE(hit);
      CHECK(hit->distance > 0.0);
      CHECK(std::abs(distance(hit->point, eye.center) - eye.retina_radius) <= 1e-9);
      const Point3 along = origin + dir * hit->distance;
      CHECK(distance(along, hit->point) <= 1e-9);
    }
  }
  SUBCASE("origin outside the eye is rejected") {
    try {
      retina_raycast({0, 0, 12.0}, {0, 0, -1}, eye);
      FAIL("expected OriginOutsideEye");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::OriginOutsideEye);
    }
  }
}

TEST_CASE("geodesic_distance_mm") {
  const EyeModel eye;
  const Point3 a{0, 0, -12};
  CHECK(geodesic_distance_mm(a, a, eye) == 0.0);
  CHECK(geodesic_distance_mm(a, -a, eye) == doctest::Approx(12.0 * std::numbers::pi));
  CHECK(12.0 * std::numbers::pi == doctest::Approx(37.699).epsilon(1e-4));
  CHECK_THROWS_AS(geodesic_distance_mm({0, 0, -11}, a, eye), Error);

  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    const Point3 u = random_unit(rng), v = random_unit(rng);
    const double oracle = 12.0 * std::acos(std::clamp(dot(u, v), -1.0, 1.0));
    CHECK(std::abs(geodesic_distance_mm(u * 12.0, v * 12.0, eye) - oracle) <= 1e-9);
  }
}

namespace {

// Offline segmentation: two contact samples belong to one episode unless a
// sample at or beyond the release clearance separates them.
int segment_episodes(const std::vector<double>& clearance, double engage, double release) {
  int episodes = 0;
  int last_contact = -1;
  for (int i = 0; i < static_cast<int>(clearance.size()); ++i) {
    if (clearance[i] > engage) continue;
    bool separated = last_contact < 0;
    for (int k = last_contact + 1; !separated && k < i; ++k) separated = clearance[k] >= release;
    if (separated) ++episodes;
    last_contact = i;
  }
  return episodes;
}

Point3 tip_with_clearance(const EyeModel& eye, double clearance) {
  return eye.center + Point3{0.0, 0.0, -(eye.retina_radius - clearance)};
}

}  // namespace

TEST_CASE("update_touch counts episodes with hysteresis") {
  const EyeModel eye;
  TouchEpisodeTracker t;
  for (int i = 0; i < 10; ++i) t = update_touch(t, eye.center, eye);
  CHECK(t.touch_count == 0);

  t = TouchEpisodeTracker{};
  for (double c : {5.0, 0.05, 0.05, 5.0}) t = update_touch(t, tip_with_clearance(eye, c), eye);
  CHECK(t.touch_count == 1);

  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> series;
    double c = 2.0;
    for (int i = 0; i < 400; ++i) {
      c += rng.normal(0.0, 0.15) + 0.02 * (1.0 - c);
      series.push_back(std::max(-0.5, c));
    }
    TouchEpisodeTracker tracker;
    int previous = 0;
    for (double x : series) {
      tracker = update_touch(tracker, tip_with_clearance(eye, x), eye);
      CHECK(tracker.touch_count >= previous);
      previous = tracker.touch_count;
    }
    CHECK(tracker.touch_count == segment_episodes(series, 0.1, 0.5));

    TouchEpisodeTracker plain{0.1, 0.1, false, 0};
    int upcrossings = 0;
    bool below = false;
    for (double x : series) {
      plain = update_touch(plain, tip_with_clearance(eye, x), eye);
      const bool now = x <= 0.1;
      if (now && !below) ++upcrossings;
      below = now;
    }
    CHECK(plain.touch_count == upcrossings);
  }
}

TEST_CASE("eye rotation integrates joystick deflection") {
  UnitQuat q = UnitQuat::identity();
  CHECK(integrate_eye_rotation(q, 0.0, 0.0, 1.0, 30.0) == q);
  for (int i = 0; i < 100; ++i) q = integrate_eye_rotation(q, 1.0, 0.0, 0.01, 30.0);
  // 1 s at full deflection yaws 30 degrees about y.
  const Point3 v = q.rotate({1.0, 0.0, 0.0});
  CHECK(std::atan2(-v.z, v.x) == doctest::Approx(std::numbers::pi / 6.0).epsilon(1e-9));
  CHECK(std::abs(q.norm() - 1.0) <= 1e-9);
}

TEST_CASE("tangent frame and gnomonic projection") {
  const EyeModel eye;
  const TangentFrame f = tangent_frame(normalized(Point3{0.3, -0.5, -0.8}));
  CHECK(std::abs(dot(f.e1, f.normal)) < 1e-12);
  CHECK(std::abs(dot(f.e2, f.normal)) < 1e-12);
  CHECK(std::abs(dot(f.e1, f.e2)) < 1e-12);
  const Point3 center = eye.center + f.normal * eye.retina_radius;
  const auto origin = gnomonic_project(eye, f, center);
  REQUIRE(origin);
  CHECK(std::abs(origin->first) < 1e-12);
  CHECK(std::abs(origin->second) < 1e-12);
  const Point3 p = surface_point_at(eye, f, 2.0, 0.0);
  CHECK(geodesic_distance_mm(center, p, eye) == doctest::Approx(2.0).epsilon(1e-12));
  const auto proj = gnomonic_project(eye, f, p);
  REQUIRE(proj);
  CHECK(proj->first == doctest::Approx(12.0 * std::tan(2.0 / 12.0)));
  CHECK(std::abs(proj->second) < 1e-12);
}
