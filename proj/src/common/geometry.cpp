#include "sylva/common/geometry.hpp"

namespace sylva {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) {
    a += two_pi;
  } else if (a > std::numbers::pi) {
    a -= two_pi;
  }
  return a;
}

Pose4 Pose4::operator*(const Pose4& rhs) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Pose4 out;
  out.t.x() = t.x() + c * rhs.t.x() - s * rhs.t.y();
  out.t.y() = t.y() + s * rhs.t.x() + c * rhs.t.y();
  out.t.z() = t.z() + rhs.t.z();
  out.yaw = wrap_angle(yaw + rhs.yaw);
  return out;
}

Vec3 Pose4::operator*(const Vec3& p) const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {t.x() + c * p.x() - s * p.y(), t.y() + s * p.x() + c * p.y(), t.z() + p.z()};
}

Pose4 Pose4::inverse() const {
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Pose4 out;
  out.t.x() = -(c * t.x() + s * t.y());
  out.t.y() = -(-s * t.x() + c * t.y());
  out.t.z() = -t.z();
  out.yaw = wrap_angle(-yaw);
  return out;
}

Eigen::Isometry3d Pose4::isometry() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  iso.translation() = t;
  return iso;
}

bool Pose4::is_finite() const { return t.allFinite() && std::isfinite(yaw); }

Eigen::Matrix3d Pose6::rotation() const {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

Eigen::Isometry3d Pose6::isometry() const {
  Eigen::Isometry3d iso = Eigen::Isometry3d::Identity();
  iso.linear() = rotation();
  iso.translation() = t;
  return iso;
}

Eigen::Matrix3d Pose6::tilt() const {
  return (Eigen::AngleAxisd(pitch, Vec3::UnitY()) * Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

}  // namespace sylva
