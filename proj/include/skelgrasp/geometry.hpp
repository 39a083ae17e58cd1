#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace skelgrasp {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Triangle = std::array<std::int32_t, 3>;

/// Axis-aligned box. An empty box has min > max.
struct Aabb {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  void extend(const Aabb& b) {
    min = min.cwiseMin(b.min);
    max = max.cwiseMax(b.max);
  }
  [[nodiscard]] bool empty() const { return (min.array() > max.array()).any(); }
  [[nodiscard]] Vec3 center() const { return 0.5 * (min + max); }
  [[nodiscard]] Vec3 extent() const { return max - min; }
  [[nodiscard]] double diagonal() const { return empty() ? 0.0 : extent().norm(); }
  [[nodiscard]] Aabb inflated(double r) const {
    return {min.array() - r, max.array() + r};
  }
  [[nodiscard]] bool overlaps(const Aabb& o) const {
    return (min.array() <= o.max.array()).all() && (o.min.array() <= max.array()).all();
  }
};

/// Rigid transform: x -> rotation * x + translation. Units are millimeters.
struct RigidPose {
  Vec3 translation = Vec3::Zero();
  Quat rotation = Quat::Identity();

  RigidPose() = default;
  RigidPose(const Vec3& t, const Quat& q) : translation(t), rotation(q.normalized()) {}

  static RigidPose identity() { return {}; }
  static RigidPose from_translation(const Vec3& t) { return {t, Quat::Identity()}; }
  static RigidPose from_rotation(const Quat& q) { return {Vec3::Zero(), q}; }
  static RigidPose from_axis_angle(const Vec3& axis, double angle) {
    return {Vec3::Zero(), Quat(Eigen::AngleAxisd(angle, axis.normalized()))};
  }
  /// Frame whose columns are the given orthonormal axes, placed at `origin`.
  static RigidPose from_frame(const Vec3& origin, const Vec3& x, const Vec3& y, const Vec3& z) {
    Mat3 r;
    r.col(0) = x;
    r.col(1) = y;
    r.col(2) = z;
    return {origin, Quat(r)};
  }

  [[nodiscard]] Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  [[nodiscard]] Vec3 rotate(const Vec3& v) const { return rotation * v; }
  [[nodiscard]] Mat3 matrix() const { return rotation.toRotationMatrix(); }

  [[nodiscard]] RigidPose inverse() const {
    Quat qi = rotation.conjugate();
    return {-(qi * translation), qi};
  }
  /// (*this) * other: apply `other` first.
  [[nodiscard]] RigidPose operator*(const RigidPose& other) const {
    return {apply(other.translation), rotation * other.rotation};
  }
};

inline Vec3 any_perpendicular(const Vec3& n) {
  Vec3 a = n.normalized();
  Vec3 ref = std::abs(a.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return a.cross(ref).normalized();
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace skelgrasp
