#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace sylva {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

/// Gravity-aligned pose (x, y, z, yaw). Roll and pitch are observable from
/// the IMU, so everything downstream of odometry works in this 4-DOF space.
struct Pose4 {
  Vec3 t = Vec3::Zero();
  double yaw = 0.0;

  Pose4() = default;
  Pose4(double x, double y, double z, double yaw_rad) : t(x, y, z), yaw(yaw_rad) {}
  Pose4(const Vec3& translation, double yaw_rad) : t(translation), yaw(yaw_rad) {}

  static Pose4 identity() { return {}; }

  Pose4 operator*(const Pose4& rhs) const;
  Vec3 operator*(const Vec3& p) const;
  Pose4 inverse() const;
  /// Relative pose from this to `other`, i.e. this^-1 * other.
  Pose4 between(const Pose4& other) const { return inverse() * other; }

  Eigen::Isometry3d isometry() const;
  bool is_finite() const;

  bool operator==(const Pose4& o) const { return t == o.t && yaw == o.yaw; }
};

/// Full rigid-body pose. Rotation is R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct Pose6 {
  Vec3 t = Vec3::Zero();
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;

  Eigen::Matrix3d rotation() const;
  Eigen::Isometry3d isometry() const;
  Pose4 gravity_aligned() const { return {t, yaw}; }
  /// Rotation that takes vectors from this pose's frame into its
  /// gravity-aligned (yaw-only) counterpart.
  Eigen::Matrix3d tilt() const;

  bool operator==(const Pose6& o) const {
    return t == o.t && roll == o.roll && pitch == o.pitch && yaw == o.yaw;
  }
};

inline Eigen::Matrix2d rot2(double yaw) {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

/// Axis-aligned rectangle in the horizontal plane.
struct Rect {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  double width() const { return max_x - min_x; }
  double height() const { return max_y - min_y; }
  bool contains(const Vec2& p) const {
    return p.x() >= min_x && p.x() <= max_x && p.y() >= min_y && p.y() <= max_y;
  }
  Rect inflated(double margin) const {
    return {min_x - margin, min_y - margin, max_x + margin, max_y + margin};
  }
};

}  // namespace sylva
