#include "sylva/sim/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sylva::sim {

namespace {
constexpr double kMinRange = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void LidarSpec::validate() const {
  if (!(vertical_fov_deg > 0.0) || channels < 1 || !(horizontal_resolution_deg > 0.0) || !(max_range > 0.0) ||
      range_noise < 0.0 || !(scan_rate_hz > 0.0)) {
    throw ConfigError("invalid LiDAR spec");
  }
  if (effective_range > max_range) {
    throw ConfigError("LiDAR effective range exceeds max range");
  }
}

int LidarSpec::azimuth_steps() const {
  return std::max(1, static_cast<int>(std::lround(360.0 / horizontal_resolution_deg)));
}

double LidarSpec::channel_elevation(int channel) const {
  if (channels == 1) {
    return deg2rad(vertical_center_deg);
  }
  const double lo = vertical_center_deg - 0.5 * vertical_fov_deg;
  return deg2rad(lo + vertical_fov_deg * channel / (channels - 1));
}

double LidarSpec::upper_elevation() const {
  return deg2rad(vertical_center_deg + (channels == 1 ? 0.0 : 0.5 * vertical_fov_deg));
}

void to_json(Json& j, const LidarSpec& s) {
  j = Json{{"vertical_fov_deg", s.vertical_fov_deg},
           {"vertical_center_deg", s.vertical_center_deg},
           {"channels", s.channels},
           {"horizontal_resolution_deg", s.horizontal_resolution_deg},
           {"max_range", s.max_range},
           {"effective_range", s.effective_range},
           {"range_noise", s.range_noise},
           {"scan_rate_hz", s.scan_rate_hz}};
}

void from_json(const Json& j, LidarSpec& s) {
  s = LidarSpec{};
  s.vertical_fov_deg = value_or(j, "vertical_fov_deg", s.vertical_fov_deg);
  s.vertical_center_deg = value_or(j, "vertical_center_deg", s.vertical_center_deg);
  s.channels = value_or(j, "channels", s.channels);
  s.horizontal_resolution_deg = value_or(j, "horizontal_resolution_deg", s.horizontal_resolution_deg);
  s.max_range = value_or(j, "max_range", s.max_range);
  s.effective_range = value_or(j, "effective_range", s.effective_range);
  s.range_noise = value_or(j, "range_noise", s.range_noise);
  s.scan_rate_hz = value_or(j, "scan_rate_hz", s.scan_rate_hz);
}

std::optional<double> intersect_frustum(const Vec3& o, const Vec3& d, double z0, double z1, const Vec2& c0,
                                        const Vec2& c1, double r0, double r1) {
  const double dz = z1 - z0;
  if (!(dz > 0.0)) {
    return std::nullopt;
  }
  const Vec2 dc = c1 - c0;
  const double dr = r1 - r0;
  const double s0 = (o.z() - z0) / dz;
  const double sd = d.z() / dz;
  // |A + tB|^2 = (C + tD)^2 with s(t) = s0 + t*sd.
  const Vec2 A = o.head<2>() - c0 - s0 * dc;
  const Vec2 B = d.head<2>() - sd * dc;
  const double C = r0 + s0 * dr;
  const double D = sd * dr;
  const double a = B.dot(B) - D * D;
  const double b = 2.0 * (A.dot(B) - C * D);
  const double c = A.dot(A) - C * C;

  double roots[2];
  int n = 0;
  if (std::abs(a) < 1e-14) {
    if (std::abs(b) < 1e-14) return std::nullopt;
    roots[n++] = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    // Numerically stable pair.
    const double q = -0.5 * (b + std::copysign(sq, b));
    double t1 = q / a;
    double t2 = (q != 0.0) ? c / q : t1;
    if (t1 > t2) std::swap(t1, t2);
    roots[n++] = t1;
    roots[n++] = t2;
  }
  for (int i = 0; i < n; ++i) {
    const double t = roots[i];
    if (t < kMinRange) continue;
    const double s = s0 + t * sd;
    if (s < 0.0 || s > 1.0) continue;
    if (C + t * D < 0.0) continue;
    return t;
  }
  return std::nullopt;
}

namespace {

double terrain_gap(const World& w, const Vec3& o, const Vec3& d, double t) {
  const Vec3 p = o + t * d;
  return p.z() - w.terrain_height(p.x(), p.y());
}

/// March along the ray with steps bounded by the terrain Lipschitz constant,
/// then bisect the bracketing interval down to machine precision.
std::optional<double> intersect_terrain(const World& w, const Vec3& o, const Vec3& d, double max_t) {
  const double lip = w.slope_bound();
  const double horiz = d.head<2>().norm();
  const double closing = lip * horiz - d.z();  // max rate at which the gap can shrink
  double g = terrain_gap(w, o, d, 0.0);
  if (g <= 0.0) {
    return std::nullopt;  // origin under the surface
  }
  if (closing <= 0.0) {
    return std::nullopt;  // climbs faster than the terrain can
  }
  const double top = w.max_terrain_height();
  constexpr double kMinStep = 0.05;
  double t = 0.0;
  while (t < max_t) {
    if (d.z() >= 0.0 && o.z() + t * d.z() > top) {
      return std::nullopt;
    }
    const double step = std::max(g / closing, kMinStep);
    const double t_next = std::min(t + step, max_t);
    const double g_next = terrain_gap(w, o, d, t_next);
    if (g_next <= 0.0) {
      double lo = t;
      double hi = t_next;
      for (int i = 0; i < 60 && hi - lo > 1e-13; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (terrain_gap(w, o, d, mid) > 0.0) lo = mid;
        else hi = mid;
      }
      // Keep the candidate whose residual is smallest.
      const double glo = std::abs(terrain_gap(w, o, d, lo));
      const double ghi = std::abs(terrain_gap(w, o, d, hi));
      return glo <= ghi ? lo : hi;
    }
    if (t_next >= max_t) break;
    t = t_next;
    g = g_next;
  }
  return std::nullopt;
}

/// Closest approach of the horizontal projection of the ray segment
/// [0, max_t] to point `c`.
double horizontal_clearance(const Vec3& o, const Vec3& d, double max_t, const Vec2& c) {
  const Vec2 od = o.head<2>();
  const Vec2 dd = d.head<2>();
  const double len2 = dd.squaredNorm();
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp((c - od).dot(dd) / len2, 0.0, max_t);
  }
  return (od + t * dd - c).norm();
}

struct TreeBound {
  Vec2 center;
  double radius;
};

TreeBound stem_bound(const GroundTruthTree& tree) {
  const Vec2 a = tree.knots.front().center;
  const Vec2 b = tree.knots.back().center;
  return {0.5 * (a + b), 0.5 * (b - a).norm() + 0.5 * tree.knots.front().diameter + 1e-6};
}

std::optional<double> intersect_crown(const GroundTruthTree& tree, const Vec3& o, const Vec3& d) {
  if (tree.crown_radius <= 0.0 || std::abs(d.z()) < 1e-12) return std::nullopt;
  const double zc = tree.base.z() + tree.crown_base;
  const double t = (zc - o.z()) / d.z();
  if (t < kMinRange) return std::nullopt;
  const Vec2 p = o.head<2>() + t * d.head<2>();
  if ((p - tree.center_at(tree.crown_base)).norm() > tree.crown_radius) return std::nullopt;
  return t;
}

std::optional<double> intersect_bush(const World& w, const Patch& patch, const Vec3& o, const Vec3& d) {
  const double top = w.terrain_height(patch.center) + World::kBushHeight;
  const double bottom = top - World::kBushHeight - 2.0;
  double best = kInf;
  const Vec2 A = o.head<2>() - patch.center;
  const Vec2 B = d.head<2>();
  const double a = B.dot(B);
  if (a > 1e-14) {
    const double b = 2.0 * A.dot(B);
    const double c = A.dot(A) - patch.radius * patch.radius;
    const double disc = b * b - 4 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t < kMinRange) continue;
        const double z = o.z() + t * d.z();
        if (z >= bottom && z <= top) {
          best = std::min(best, t);
          break;
        }
      }
    }
  }
  if (std::abs(d.z()) > 1e-12) {
    const double t = (top - o.z()) / d.z();
    if (t >= kMinRange && (o.head<2>() + t * d.head<2>() - patch.center).norm() <= patch.radius) {
      best = std::min(best, t);
    }
  }
  if (best == kInf) return std::nullopt;
  return best;
}

}  // namespace

std::vector<std::size_t> trees_near(const World& world, const Vec3& origin, double max_range) {
  std::vector<std::size_t> out;
  const auto& trees = world.trees();
  for (std::size_t i = 0; i < trees.size(); ++i) {
    const TreeBound b = stem_bound(trees[i]);
    const double reach = max_range + std::max(b.radius, trees[i].crown_radius + (b.center - trees[i].base.head<2>()).norm());
    if ((b.center - origin.head<2>()).norm() <= reach) {
      out.push_back(i);
    }
  }
  return out;
}

std::optional<RayHit> cast_ray(const World& world, const Vec3& o, const Vec3& d, double max_range,
                               const std::vector<std::size_t>& candidate_trees) {
  double best = max_range;
  PointLabel label;
  bool hit = false;
  if (auto t = intersect_terrain(world, o, d, max_range); t && *t <= best) {
    best = *t;
    label = {Surface::Terrain, -1};
    hit = true;
  }
  const auto& trees = world.trees();
  for (std::size_t idx : candidate_trees) {
    const auto& tree = trees[idx];
    if (auto t = intersect_crown(tree, o, d); t && *t < best) {
      best = *t;
      label = {Surface::Crown, tree.id};
      hit = true;
    }
    const TreeBound b = stem_bound(tree);
    if (horizontal_clearance(o, d, best, b.center) > b.radius) {
      continue;
    }
    for (std::size_t k = 1; k < tree.knots.size(); ++k) {
      const auto& lo = tree.knots[k - 1];
      const auto& hi = tree.knots[k];
      const double z0 = tree.base.z() + lo.height;
      const double z1 = tree.base.z() + hi.height;
      // Skip segments the ray cannot reach vertically before `best`.
      const double za = o.z();
      const double zb = o.z() + best * d.z();
      if (std::max(za, zb) < z0 || std::min(za, zb) > z1) continue;
      if (auto t = intersect_frustum(o, d, z0, z1, lo.center, hi.center, 0.5 * lo.diameter, 0.5 * hi.diameter);
          t && *t < best) {
        best = *t;
        label = {Surface::Stem, tree.id};
        hit = true;
      }
    }
  }
  const auto& patches = world.patches();
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].type != PatchType::Bush) continue;
    if (horizontal_clearance(o, d, best, patches[i].center) > patches[i].radius) continue;
    if (auto t = intersect_bush(world, patches[i], o, d); t && *t < best) {
      best = *t;
      label = {Surface::Patch, static_cast<std::int32_t>(i)};
      hit = true;
    }
  }
  if (!hit) return std::nullopt;
  return RayHit{best, label};
}

PointCloud scan_lidar(const World& world, const Pose6& sensor_pose, const LidarSpec& lidar, Rng& noise,
                      ExecPolicy policy) {
  if (!world.bounds().contains(sensor_pose.t.head<2>())) {
    throw Error("sensor pose outside the world bounds");
  }
  const int steps = lidar.azimuth_steps();
  const std::size_t n = lidar.ray_count();
  std::vector<double> range_noise(n, 0.0);
  if (lidar.range_noise > 0.0) {
    for (auto& v : range_noise) v = lidar.range_noise * draw_normal(noise);
  }
  const Eigen::Matrix3d R = sensor_pose.rotation();
  const Vec3 origin = sensor_pose.t;
  const auto candidates = trees_near(world, origin, lidar.max_range);

  std::vector<double> elevation_cos(lidar.channels), elevation_sin(lidar.channels);
  for (int c = 0; c < lidar.channels; ++c) {
    const double e = lidar.channel_elevation(c);
    elevation_cos[c] = std::cos(e);
    elevation_sin[c] = std::sin(e);
  }
  const double az_step = deg2rad(360.0 / steps);

  std::vector<std::optional<RayHit>> hits(n);
  for_each_index(policy, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
    const int c = static_cast<int>(i / steps);
    const int k = static_cast<int>(i % steps);
    const double az = k * az_step;
    const Vec3 local(elevation_cos[c] * std::cos(az), elevation_cos[c] * std::sin(az), elevation_sin[c]);
    hits[i] = cast_ray(world, origin, R * local, lidar.max_range, candidates);
  });

  PointCloud cloud;
  cloud.reserve(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    if (!hits[i]) continue;
    const int c = static_cast<int>(i / steps);
    const int k = static_cast<int>(i % steps);
    const double az = k * az_step;
    const Vec3 local(elevation_cos[c] * std::cos(az), elevation_cos[c] * std::sin(az), elevation_sin[c]);
    const double r = hits[i]->range + range_noise[i];
    if (r <= 0.0) continue;
    cloud.push_back(local * r, hits[i]->label);
  }
  return cloud;
}

}  // namespace sylva::sim
