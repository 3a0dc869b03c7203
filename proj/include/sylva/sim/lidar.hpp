#pragma once

#include <optional>
#include <vector>

#include "sylva/common/json.hpp"
#include "sylva/common/parallel.hpp"
#include "sylva/common/point_cloud.hpp"
#include "sylva/common/random.hpp"
#include "sylva/sim/world.hpp"

namespace sylva::sim {

struct LidarSpec {
  double vertical_fov_deg = 104.0;
  double vertical_center_deg = 0.0;  // elevation of the middle channel
  int channels = 64;
  double horizontal_resolution_deg = 1.0;
  double max_range = 40.0;
  double effective_range = 15.0;
  double range_noise = 0.01;
  double scan_rate_hz = 1.0;

  void validate() const;
  int azimuth_steps() const;
  std::size_t ray_count() const { return static_cast<std::size_t>(channels) * azimuth_steps(); }
  double channel_elevation(int channel) const;  // rad
  double upper_elevation() const;               // rad
};

void to_json(Json& j, const LidarSpec& s);
void from_json(const Json& j, LidarSpec& s);

struct RayHit {
  double range = 0.0;
  PointLabel label;
};

/// Trees whose geometry can be reached within `max_range` of `origin`.
std::vector<std::size_t> trees_near(const World& world, const Vec3& origin, double max_range);

/// Nearest intersection of a unit-direction ray with terrain, stems, crowns
/// and bush proxies. Only the listed trees are tested.
std::optional<RayHit> cast_ray(const World& world, const Vec3& origin, const Vec3& direction, double max_range,
                               const std::vector<std::size_t>& candidate_trees);

/// One ray per (channel, azimuth step); returns points in the sensor frame
/// with ground-truth labels. Noise is drawn serially up front so the serial
/// and parallel paths produce identical clouds.
PointCloud scan_lidar(const World& world, const Pose6& sensor_pose, const LidarSpec& lidar, Rng& noise,
                      ExecPolicy policy = ExecPolicy::Parallel);

/// Exact ray-frustum intersection with the lateral surface of an oblique
/// cone frustum whose horizontal cross-sections are circles.
std::optional<double> intersect_frustum(const Vec3& origin, const Vec3& direction, double z0, double z1,
                                        const Vec2& c0, const Vec2& c1, double r0, double r1);

}  // namespace sylva::sim
