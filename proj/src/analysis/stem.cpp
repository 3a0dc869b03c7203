#include "sylva/analysis/stem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace sylva::analysis {

void to_json(Json& j, const StemParams& p) {
  j = Json{{"band_height", p.band_height},
           {"min_band_points", p.min_band_points},
           {"rms_gate", p.rms_gate},
           {"low_coverage_deg", p.low_coverage_deg},
           {"breast_height", p.breast_height}};
}

void from_json(const Json& j, StemParams& p) {
  StemParams d;
  p.band_height = value_or(j, "band_height", d.band_height);
  p.min_band_points = value_or(j, "min_band_points", d.min_band_points);
  p.rms_gate = value_or(j, "rms_gate", d.rms_gate);
  p.low_coverage_deg = value_or(j, "low_coverage_deg", d.low_coverage_deg);
  p.breast_height = value_or(j, "breast_height", d.breast_height);
  if (!(p.band_height > 0.0) || p.min_band_points < 3 || !(p.rms_gate > 0.0)) {
    throw ConfigError("invalid stem parameters");
  }
}

std::vector<StemCircle> fit_circles_along_stem(const std::vector<Vec3>& points, const std::vector<double>& heights,
                                               const StemParams& params) {
  std::map<long, std::vector<Vec2>> bands;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(heights[i] >= 0.0)) continue;
    bands[static_cast<long>(std::floor(heights[i] / params.band_height))].push_back(points[i].head<2>());
  }
  std::vector<StemCircle> out;
  for (const auto& [k, pts] : bands) {
    if (pts.size() < params.min_band_points) continue;
    Circle c;
    try {
      c = fit_circle(pts);
    } catch (const FitFailed&) {
      continue;
    }
    if (c.rms > params.rms_gate) continue;
    StemCircle s;
    s.height = (static_cast<double>(k) + 0.5) * params.band_height;
    s.center = c.center;
    s.radius = c.radius;
    s.rms = c.rms;
    s.arc_deg = arc_coverage_deg(pts, c.center);
    s.low_coverage = s.arc_deg < params.low_coverage_deg;
    out.push_back(s);
  }
  if (out.size() < 2) throw ReconstructionFailed("fewer than two valid stem bands");
  return out;
}

double Frustum::volume() const { return std::numbers::pi * (z1 - z0) * (r0 * r0 + r0 * r1 + r1 * r1) / 3.0; }

std::vector<Frustum> reconstruct_frustums(const std::vector<StemCircle>& circles) {
  if (circles.size() < 2) throw ReconstructionFailed("frustum stack needs at least two circles");
  std::vector<Frustum> out;
  for (std::size_t i = 0; i + 1 < circles.size(); ++i) {
    const StemCircle& a = circles[i];
    const StemCircle& b = circles[i + 1];
    if (!(b.height > a.height)) throw ReconstructionFailed("circle heights must increase strictly");
    out.push_back({a.height, b.height, a.center, b.center, a.radius, b.radius});
  }
  return out;
}

double stem_volume(const std::vector<Frustum>& frustums) {
  double v = 0.0;
  for (const Frustum& f : frustums) v += f.volume();
  return v;
}

std::optional<double> diameter_at_breast_height(const std::vector<StemCircle>& circles, const StemParams& params,
                                                bool* extrapolated) {
  if (extrapolated) *extrapolated = false;
  if (circles.size() < 2) return std::nullopt;
  const double bh = params.breast_height;
  std::size_t lo = 0;
  bool extra = false;
  if (bh < circles.front().height) {
    if (circles.front().height - bh > params.band_height) return std::nullopt;
    extra = true;
  } else if (bh > circles.back().height) {
    if (bh - circles.back().height > params.band_height) return std::nullopt;
    lo = circles.size() - 2;
    extra = true;
  } else {
    while (lo + 2 < circles.size() && circles[lo + 1].height <= bh) ++lo;
  }
  const StemCircle& a = circles[lo];
  const StemCircle& b = circles[lo + 1];
  const double t = (bh - a.height) / (b.height - a.height);
  const double r = a.radius + t * (b.radius - a.radius);
  if (!(r > 0.0)) return std::nullopt;
  if (extrapolated) *extrapolated = extra;
  return 2.0 * r;
}

double visibility_ceiling(const Vec2& position, const std::vector<Vec3>& viewpoints, const Visibility& visibility) {
  double ceiling = -std::numeric_limits<double>::infinity();
  const double slope = std::tan(visibility.upper_elevation);
  for (const Vec3& v : viewpoints) {
    const double d = (v.head<2>() - position).norm();
    if (d > visibility.range) continue;
    const double reach = std::min(d * slope, std::sqrt(visibility.range * visibility.range - d * d));
    ceiling = std::max(ceiling, v.z() + reach);
  }
  return ceiling;
}

Traits estimate_traits(const std::vector<StemCircle>& circles, const std::vector<double>& heights, double ground_z,
                       const Vec2& position, const std::vector<Vec3>& viewpoints, const StemParams& params,
                       const Visibility& visibility) {
  Traits t;
  t.dbh = diameter_at_breast_height(circles, params, &t.dbh_extrapolated);
  for (double h : heights) t.height = std::max(t.height, h);
  if (!viewpoints.empty()) {
    const double ceiling = visibility_ceiling(position, viewpoints, visibility);
    t.fov_limited = std::isfinite(ceiling) && ground_z + t.height >= ceiling - params.band_height;
  }
  return t;
}

}  // namespace sylva::analysis
