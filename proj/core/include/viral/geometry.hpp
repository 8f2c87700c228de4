#pragma once

#include <cmath>

namespace viral {

inline constexpr double kPi = 3.14159265358979323846;

// shortest signed angular difference, result in (-pi, pi]
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  if (a > kPi) a -= 2.0 * kPi;
  return a;
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double norm() const { return std::hypot(x, y); }
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  double norm2() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm2()); }
  Vec2 xy() const { return {x, y}; }
};

// planar pose; yaw kept in (-pi, pi]
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;

  void normalize() { yaw = wrap_angle(yaw); }
};

// world -> body frame of `pose` (rotation only applies to xy)
inline Vec2 to_body(const Pose2& pose, const Vec2& world) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  const double dx = world.x - pose.x, dy = world.y - pose.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

// body frame of `pose` -> world
inline Vec2 to_world(const Pose2& pose, const Vec2& body) {
  const double c = std::cos(pose.yaw), s = std::sin(pose.yaw);
  return {pose.x + c * body.x - s * body.y, pose.y + s * body.x + c * body.y};
}

inline double bearing_to(const Pose2& from, double tx, double ty) {
  return std::atan2(ty - from.y, tx - from.x);
}

}  // namespace viral
