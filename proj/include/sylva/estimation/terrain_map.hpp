#pragma once

#include <cstdint>

#include "sylva/common/grid.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/point_cloud.hpp"

namespace sylva::estimation {

struct TerrainMapParams {
  double resolution = 0.1;   // m
  double window = 24.0;      // side length of the robot-centered window, m
  double alpha = 0.5;        // weight of the newest observation
  double band = 0.1;         // thickness of the lowest band, m
  double body_height = 1.0;  // points above the elevation up to this height count as obstacles
  double max_range = 14.0;   // horizontal insertion range, m
  // Returns above sensor_z + margin + rise * horizontal distance are ignored
  // (canopy seen from below would otherwise pass for ground).
  double max_rise = 0.4;
  double rise_margin = 0.5;
  double recenter_distance = 1.0;
};

void to_json(Json& j, const TerrainMapParams& p);
void from_json(const Json& j, TerrainMapParams& p);

struct TerrainCell {
  double elevation = 0.0;
  double obstacle = 0.0;  // tallest return within body height above the elevation, m
  bool known = false;

  bool operator==(const TerrainCell&) const = default;
};

/// Robot-centered 2.5D elevation window in the odometry frame.
class TerrainMap {
 public:
  explicit TerrainMap(TerrainMapParams params = {}, Vec2 center = Vec2::Zero());

  const TerrainMapParams& params() const { return params_; }
  const Grid2D<TerrainCell>& grid() const { return grid_; }
  Grid2D<TerrainCell>& grid() { return grid_; }
  Vec2 center() const;

  /// Shifts the window so it is centered on `center`, keeping overlapping
  /// cells. The origin stays aligned to the resolution lattice.
  void recenter(const Vec2& center);
  std::size_t known_count() const;

 private:
  TerrainMapParams params_;
  Grid2D<TerrainCell> grid_;
};

/// Inserts a sensor-frame scan taken at `sensor_pose` (odometry frame).
/// Per cell the new observation is the mean of the lowest band of returns,
/// blended exponentially with the previous estimate.
void update_terrain_map(TerrainMap& map, const PointCloud& scan, const Eigen::Isometry3d& sensor_pose);

}  // namespace sylva::estimation
