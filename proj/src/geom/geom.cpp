#include "retinavr/geom.hpp"

#include <algorithm>
#include <numbers>
#include <string>

#include "retinavr/error.hpp"

namespace retinavr {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void require_finite(const Point3& p, const char* what) {
  if (!is_finite(p)) throw Error(ErrorCode::NonFiniteInput, std::string(what) + " is not finite");
}

}  // namespace

Point3 normalized(const Point3& p) {
  const double n = norm(p);
  if (!std::isfinite(n) || n == 0.0) throw Error(ErrorCode::NonFiniteInput, "cannot normalize vector");
  return p / n;
}

UnitQuat UnitQuat::from_axis_angle(const Point3& axis, double radians) {
  const Point3 u = retinavr::normalized(axis);
  const double s = std::sin(0.5 * radians);
  return UnitQuat{std::cos(0.5 * radians), u.x * s, u.y * s, u.z * s}.normalized();
}

UnitQuat UnitQuat::operator*(const UnitQuat& o) const {
  return UnitQuat{w * o.w - x * o.x - y * o.y - z * o.z,
                  w * o.x + x * o.w + y * o.z - z * o.y,
                  w * o.y - x * o.z + y * o.w + z * o.x,
                  w * o.z + x * o.y - y * o.x + z * o.w}
      .normalized();
}

Point3 UnitQuat::rotate(const Point3& v) const {
  // v' = v + 2w (q x v) + 2 q x (q x v)
  const Point3 q{x, y, z};
  const Point3 t = cross(q, v) * 2.0;
  return v + t * w + cross(q, t);
}

UnitQuat UnitQuat::normalized() const {
  const double n = norm();
  if (!std::isfinite(n) || n == 0.0) throw Error(ErrorCode::NonFiniteInput, "degenerate quaternion");
  if (n == 1.0) return *this;
  return {w / n, x / n, y / n, z / n};
}

bool is_finite(const Pose& pose) {
  const auto& q = pose.orientation;
  return is_finite(pose.position) && std::isfinite(q.w) && std::isfinite(q.x) &&
         std::isfinite(q.y) && std::isfinite(q.z);
}

void EyeModel::validate() const {
  if (!(retina_radius > 0.0) || !std::isfinite(retina_radius))
    throw Error(ErrorCode::InvalidConfig, "retina_radius must be positive");
  if (!is_finite(center)) throw Error(ErrorCode::InvalidConfig, "eye center is not finite");
  if (std::abs(norm(posterior_pole_dir) - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidConfig, "posterior_pole_dir must be unit length");
  if (std::abs(eye_rotation.norm() - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidConfig, "eye_rotation must be unit length");
}

TrocarRig TrocarRig::standard(const EyeModel& eye) {
  const double polar = 50.0 * kDegToRad;
  const double r = eye.retina_radius;
  TrocarRig rig;
  rig.trocar_left = eye.center + Point3{0.0, r * std::sin(polar), r * std::cos(polar)};
  rig.trocar_right = eye.center + Point3{0.0, -r * std::sin(polar), r * std::cos(polar)};
  return rig;
}

void TrocarRig::validate(const EyeModel& eye) const {
  if (!is_finite(trocar_left) || !is_finite(trocar_right))
    throw Error(ErrorCode::NonFiniteInput, "trocar position is not finite");
  if (distance(trocar_left, trocar_right) < 1e-9)
    throw Error(ErrorCode::DegenerateRig, "trocars coincide");
  for (const Point3* t : {&trocar_left, &trocar_right}) {
    if (std::abs(distance(*t, eye.center) - eye.retina_radius) > 1e-6)
      throw Error(ErrorCode::DegenerateRig, "trocar is not on the retina sphere");
  }
  if (!(lateral_scale > 0.0) || !(depth_scale > 0.0))
    throw Error(ErrorCode::InvalidConfig, "motion scales must be positive");
  if (!(rest_depth_mm > min_insertion_mm) || !(min_insertion_mm >= 0.0) ||
      !(rest_depth_mm < 2.0 * eye.retina_radius))
    throw Error(ErrorCode::InvalidConfig, "rest depth outside the globe");
}

Pose apply_offset(const Pose& raw, const Pose& offset) {
  const UnitQuat inv = offset.orientation.conjugate();
  return Pose{inv.rotate(raw.position - offset.position), inv * raw.orientation};
}

Pose remove_offset(const Pose& relative, const Pose& offset) {
  return Pose{offset.position + offset.orientation.rotate(relative.position),
              offset.orientation * relative.orientation};
}

Point3 fulcrum_displacement(const Point3& d, const Point3& axis, double lateral_scale,
                            double depth_scale) {
  const Point3 axial = axis * dot(d, axis);
  const Point3 lateral = d - axial;
  return axial * depth_scale - lateral * lateral_scale;
}

UnitQuat ergonomic_rotation(const TrocarRig& rig) {
  return UnitQuat::from_axis_angle({1.0, 0.0, 0.0}, rig.ergonomic_rotation_deg * kDegToRad);
}

InstrumentState map_controller_pose(const Pose& raw, const TrocarRig& rig,
                                    const CalibrationOffset& cal, Hand hand,
                                    const EyeModel& eye, InstrumentKind right_tool) {
  if (!is_finite(raw)) throw Error(ErrorCode::NonFiniteInput, "controller pose is not finite");
  if (distance(rig.trocar_left, rig.trocar_right) < 1e-9)
    throw Error(ErrorCode::DegenerateRig, "trocars coincide");

  const Pose relative = apply_offset(raw, cal.offset(hand));
  const Point3 d = ergonomic_rotation(rig).rotate(relative.position);

  const Point3& trocar = rig.trocar(hand);
  const Point3 axis = normalized(eye.center - trocar);
  Point3 tip = trocar + axis * rig.rest_depth_mm +
               fulcrum_displacement(d, axis, rig.lateral_scale, rig.depth_scale);

  const double depth = dot(tip - trocar, axis);
  const bool inserted = depth >= rig.min_insertion_mm;
  if (!inserted) tip += axis * (rig.min_insertion_mm - depth);
  const Point3 radial = tip - eye.center;
  const double r = norm(radial);
  if (r > eye.retina_radius) tip = eye.center + radial * (eye.retina_radius / r);

  // Express in the fundus frame, which rotates with the globe.
  const UnitQuat to_fundus = eye.eye_rotation.conjugate();
  const Point3 tip_f = eye.center + to_fundus.rotate(tip - eye.center);
  const Point3 trocar_f = eye.center + to_fundus.rotate(trocar - eye.center);

  InstrumentState out;
  out.kind = hand == Hand::Left ? InstrumentKind::LightPipe : right_tool;
  out.tip = tip_f;
  out.axis = normalized(tip_f - trocar_f);
  out.inside_eye = inserted;
  return out;
}

Pose controller_pose_for_tip(const Point3& tip, const TrocarRig& rig, const CalibrationOffset& cal,
                             Hand hand, const EyeModel& eye) {
  const Point3 tip_world = eye.center + eye.eye_rotation.rotate(tip - eye.center);
  const Point3& trocar = rig.trocar(hand);
  const Point3 axis = normalized(eye.center - trocar);
  const Point3 delta = tip_world - (trocar + axis * rig.rest_depth_mm);
  const Point3 axial = axis * dot(delta, axis);
  const Point3 lateral = delta - axial;
  const Point3 d = axial / rig.depth_scale - lateral / rig.lateral_scale;
  const Point3 controller = ergonomic_rotation(rig).conjugate().rotate(d);
  return remove_offset(Pose{controller, UnitQuat::identity()}, cal.offset(hand));
}

bool sphere_contact(const Point3& tip, const Point3& center, double radius) {
  const Point3 d = tip - center;
  return dot(d, d) <= radius * radius;
}

std::optional<RaySurfaceHit> retina_raycast(const Point3& origin, const Point3& dir,
                                            const EyeModel& eye) {
  require_finite(origin, "ray origin");
  const Point3 u = normalized(dir);
  const Point3 m = origin - eye.center;
  const double r = eye.retina_radius;
  const double c = dot(m, m) - r * r;
  if (!(c < 0.0)) throw Error(ErrorCode::OriginOutsideEye, "ray origin is not inside the eye");
  const double b = dot(m, u);
  const double root = std::sqrt(b * b - c);
  // Both forms equal -b + root; pick the one without cancellation.
  const double t = b > 0.0 ? -c / (b + root) : root - b;
  if (!(t > 0.0)) return std::nullopt;
  Point3 p = origin + u * t;
  const Point3 radial = p - eye.center;
  p = eye.center + radial * (r / norm(radial));
  return RaySurfaceHit{p, t};
}

double geodesic_distance_mm(const Point3& a, const Point3& b, const EyeModel& eye) {
  const Point3 ua = a - eye.center;
  const Point3 ub = b - eye.center;
  if (std::abs(norm(ua) - eye.retina_radius) > 1e-6 || std::abs(norm(ub) - eye.retina_radius) > 1e-6)
    throw Error(ErrorCode::PointOffSurface, "point is not on the retinal surface");
  return eye.retina_radius * std::atan2(norm(cross(ua, ub)), dot(ua, ub));
}

void TouchEpisodeTracker::validate() const {
  if (!(engage_threshold_mm >= 0.0) || !(release_threshold_mm >= engage_threshold_mm))
    throw Error(ErrorCode::InvalidConfig, "touch thresholds require release >= engage >= 0");
}

TouchEpisodeTracker update_touch(TouchEpisodeTracker tracker, const Point3& tip,
                                 const EyeModel& eye) {
  const double clearance = retinal_clearance(tip, eye);
  if (!tracker.in_contact) {
    if (clearance <= tracker.engage_threshold_mm) {
      tracker.in_contact = true;
      ++tracker.touch_count;
    }
  } else if (clearance >= tracker.release_threshold_mm && clearance > tracker.engage_threshold_mm) {
    tracker.in_contact = false;
  }
  return tracker;
}

UnitQuat integrate_eye_rotation(const UnitQuat& current, double joystick_x, double joystick_y,
                                double dt_s, double rate_deg_s) {
  const double jx = std::clamp(joystick_x, -1.0, 1.0);
  const double jy = std::clamp(joystick_y, -1.0, 1.0);
  if (jx == 0.0 && jy == 0.0) return current;
  const double step = rate_deg_s * kDegToRad * dt_s;
  const UnitQuat yaw = UnitQuat::from_axis_angle({0.0, 1.0, 0.0}, jx * step);
  const UnitQuat pitch = UnitQuat::from_axis_angle({1.0, 0.0, 0.0}, jy * step);
  return current * yaw * pitch;
}

TangentFrame tangent_frame(const Point3& unit_normal) {
  const Point3 n = normalized(unit_normal);
  // Reference axis chosen away from the normal to keep e1 well conditioned.
  const Point3 ref = std::abs(n.z) < 0.9 ? Point3{0.0, 0.0, 1.0} : Point3{1.0, 0.0, 0.0};
  const Point3 e1 = normalized(cross(ref, n));
  return TangentFrame{n, e1, cross(n, e1)};
}

Point3 surface_point_at(const EyeModel& eye, const TangentFrame& frame, double geodesic_mm,
                        double heading_rad) {
  const double angle = geodesic_mm / eye.retina_radius;
  const Point3 heading = frame.e1 * std::cos(heading_rad) + frame.e2 * std::sin(heading_rad);
  const Point3 u = frame.normal * std::cos(angle) + heading * std::sin(angle);
  return eye.center + u * eye.retina_radius;
}

std::optional<std::pair<double, double>> gnomonic_project(const EyeModel& eye,
                                                          const TangentFrame& frame,
                                                          const Point3& surface_point) {
  const Point3 u = normalized(surface_point - eye.center);
  const double cos_c = dot(u, frame.normal);
  if (!(cos_c > 0.0)) return std::nullopt;
  const double scale = eye.retina_radius / cos_c;
  return std::make_pair(scale * dot(u, frame.e1), scale * dot(u, frame.e2));
}

}  // namespace retinavr
