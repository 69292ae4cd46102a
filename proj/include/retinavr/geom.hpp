#pragma once

#include <cmath>
#include <optional>

namespace retinavr {

/// Cartesian point or displacement in engine units (millimeters).
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Point3 operator-() const { return {-x, -y, -z}; }
  constexpr Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Point3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Point3& operator+=(const Point3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Point3& operator-=(const Point3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr bool operator==(const Point3&) const = default;
};

constexpr Point3 operator*(double s, const Point3& p) { return p * s; }
constexpr double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Point3 cross(const Point3& a, const Point3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Point3& p) { return std::sqrt(dot(p, p)); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }
inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}
/// Throws NonFiniteInput for zero-length or non-finite input.
Point3 normalized(const Point3& p);

/// Rotation quaternion. Every producing operation renormalizes.
struct UnitQuat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static constexpr UnitQuat identity() { return {}; }
  static UnitQuat from_axis_angle(const Point3& axis, double radians);

  UnitQuat conjugate() const { return {w, -x, -y, -z}; }
  UnitQuat operator*(const UnitQuat& o) const;
  Point3 rotate(const Point3& v) const;
  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  UnitQuat normalized() const;
  bool operator==(const UnitQuat&) const = default;
};

struct Pose {
  Point3 position;
  UnitQuat orientation;
  bool operator==(const Pose&) const = default;
};

bool is_finite(const Pose& pose);

struct EyeModel {
  Point3 center{0.0, 0.0, 0.0};
  double retina_radius = 12.0;
  Point3 posterior_pole_dir{0.0, 0.0, -1.0};
  UnitQuat eye_rotation = UnitQuat::identity();

  /// Throws InvalidConfig when the radius or pole direction is unusable.
  void validate() const;
  Point3 posterior_pole() const { return center + posterior_pole_dir * retina_radius; }
};

enum class Hand { Left, Right };
enum class InstrumentKind { LightPipe, Vitrector, LaserProbe };

/// Scleral entry points and the hand-to-tip motion scaling.
struct TrocarRig {
  Point3 trocar_left;
  Point3 trocar_right;
  double lateral_scale = 0.5;
  double depth_scale = 1.0;
  double ergonomic_rotation_deg = 45.0;
  /// Insertion depth of the tip at the calibrated rest pose.
  double rest_depth_mm = 10.0;
  /// The tip is never withdrawn past this depth behind the trocar.
  double min_insertion_mm = 0.5;

  /// Trocars on the sphere 50 degrees from the anterior pole, left at +y, right at -y.
  static TrocarRig standard(const EyeModel& eye);

  void validate(const EyeModel& eye) const;
  const Point3& trocar(Hand hand) const { return hand == Hand::Left ? trocar_left : trocar_right; }
};

struct InstrumentState {
  InstrumentKind kind = InstrumentKind::Vitrector;
  Point3 tip;
  Point3 axis{0.0, 0.0, -1.0};
  bool inside_eye = true;
};

/// Controller rest poses captured at calibration time.
struct CalibrationOffset {
  Pose pose_offset_left;
  Pose pose_offset_right;

  const Pose& offset(Hand hand) const { return hand == Hand::Left ? pose_offset_left : pose_offset_right; }
  bool operator==(const CalibrationOffset&) const = default;
};

/// Expresses a raw pose relative to a calibration rest pose.
Pose apply_offset(const Pose& raw, const Pose& offset);
/// Inverse of apply_offset.
Pose remove_offset(const Pose& relative, const Pose& offset);

/// Tip displacement produced by a hand displacement `d` pivoting through a trocar
/// whose inward axis is `axis`: lateral part inverted and scaled, axial part scaled.
Point3 fulcrum_displacement(const Point3& d, const Point3& axis, double lateral_scale,
                            double depth_scale);

/// Rotation taking controller-space displacements into instrument space.
UnitQuat ergonomic_rotation(const TrocarRig& rig);

InstrumentState map_controller_pose(const Pose& raw, const TrocarRig& rig,
                                    const CalibrationOffset& cal, Hand hand,
                                    const EyeModel& eye,
                                    InstrumentKind right_tool = InstrumentKind::Vitrector);

/// Raw controller pose that places the tip at `tip` (fundus frame). No clamping is
/// modelled, so round trips only hold for tips inside the reachable region.
Pose controller_pose_for_tip(const Point3& tip, const TrocarRig& rig, const CalibrationOffset& cal,
                             Hand hand, const EyeModel& eye);

/// Closed ball test.
bool sphere_contact(const Point3& tip, const Point3& center, double radius);

struct RaySurfaceHit {
  Point3 point;
  double distance = 0.0;
};

/// Forward hit of the ray with the inner retinal surface. Throws OriginOutsideEye
/// unless the origin is strictly inside the globe.
std::optional<RaySurfaceHit> retina_raycast(const Point3& origin, const Point3& dir,
                                            const EyeModel& eye);

double geodesic_distance_mm(const Point3& a, const Point3& b, const EyeModel& eye);

/// Distance from the tip to the retinal surface, negative when outside.
inline double retinal_clearance(const Point3& tip, const EyeModel& eye) {
  return eye.retina_radius - distance(tip, eye.center);
}

struct TouchEpisodeTracker {
  double engage_threshold_mm = 0.1;
  double release_threshold_mm = 0.5;
  bool in_contact = false;
  int touch_count = 0;

  void validate() const;
};

TouchEpisodeTracker update_touch(TouchEpisodeTracker tracker, const Point3& tip,
                                 const EyeModel& eye);

/// Joystick-driven globe rotation: x deflection yaws about the eye's y axis,
/// y deflection pitches about its x axis, at `rate_deg_s` per unit deflection.
UnitQuat integrate_eye_rotation(const UnitQuat& current, double joystick_x, double joystick_y,
                                double dt_s, double rate_deg_s);

/// Orthonormal tangent basis (e1, e2) at a unit surface normal.
struct TangentFrame {
  Point3 normal;
  Point3 e1;
  Point3 e2;
};
TangentFrame tangent_frame(const Point3& unit_normal);

/// Point on the sphere reached by walking `geodesic_mm` from `origin_normal` along
/// tangent heading `heading_rad` (measured from e1 towards e2).
Point3 surface_point_at(const EyeModel& eye, const TangentFrame& frame, double geodesic_mm,
                        double heading_rad);

/// Gnomonic projection of a surface point onto the tangent plane of `frame`,
/// returned in millimeters along (e1, e2). Nullopt for the far hemisphere.
std::optional<std::pair<double, double>> gnomonic_project(const EyeModel& eye,
                                                          const TangentFrame& frame,
                                                          const Point3& surface_point);

}  // namespace retinavr
