#pragma once

#include <vector>

#include "sylva/common/error.hpp"
#include "sylva/common/geometry.hpp"

namespace sylva::analysis {

class FitFailed : public Error {
 public:
  using Error::Error;
};

struct Circle {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  double rms = 0.0;
};

/// Algebraic least-squares circle (Kasa). Needs three non-collinear points.
Circle fit_circle_kasa(const std::vector<Vec2>& points);
/// Levenberg-Marquardt on the geometric residual |p - c| - r. Only steps
/// that lower the cost are taken, so the RMS never exceeds the initial one.
Circle refine_circle(const std::vector<Vec2>& points, const Circle& initial, int max_iterations = 50);
Circle fit_circle(const std::vector<Vec2>& points);
double circle_rms(const std::vector<Vec2>& points, const Vec2& center, double radius);

/// Angular span of the points around `center`: 360 minus the widest gap.
double arc_coverage_deg(const std::vector<Vec2>& points, const Vec2& center);

struct Cylinder {
  Vec3 point = Vec3::Zero();               // on the axis
  Vec3 direction = Vec3::UnitZ();          // unit, pointing up
  double radius = 0.0;
  double rms = 0.0;

  double axis_distance(const Vec3& p) const;
  /// Axis point at height `z`.
  Vec3 at_height(double z) const;
};

/// Least-squares cylinder over axis tilt, axis point and radius, started
/// from a vertical axis through the horizontal centroid.
Cylinder fit_cylinder(const std::vector<Vec3>& points, int max_iterations = 100);

}  // namespace sylva::analysis
