#include "sylva/estimation/terrain_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sylva/common/error.hpp"

namespace sylva::estimation {

void to_json(Json& j, const TerrainMapParams& p) {
  j = Json{{"resolution", p.resolution}, {"window", p.window},       {"alpha", p.alpha},
           {"band", p.band},             {"body_height", p.body_height}, {"max_range", p.max_range},
           {"max_rise", p.max_rise},         {"rise_margin", p.rise_margin},
           {"recenter_distance", p.recenter_distance}};
}

void from_json(const Json& j, TerrainMapParams& p) {
  p = TerrainMapParams{};
  p.resolution = value_or(j, "resolution", p.resolution);
  p.window = value_or(j, "window", p.window);
  p.alpha = value_or(j, "alpha", p.alpha);
  p.band = value_or(j, "band", p.band);
  p.body_height = value_or(j, "body_height", p.body_height);
  p.max_range = value_or(j, "max_range", p.max_range);
  p.max_rise = value_or(j, "max_rise", p.max_rise);
  p.rise_margin = value_or(j, "rise_margin", p.rise_margin);
  p.recenter_distance = value_or(j, "recenter_distance", p.recenter_distance);
  if (!(p.resolution > 0.0) || !(p.window > p.resolution) || !(p.alpha > 0.0) || p.alpha > 1.0 ||
      p.band < 0.0 || !(p.body_height > 0.0)) {
    throw ConfigError("invalid terrain map parameters");
  }
}

namespace {

Vec2 aligned_origin(const Vec2& center, double res, int n) {
  const double half = 0.5 * n * res;
  return {std::floor((center.x() - half) / res) * res, std::floor((center.y() - half) / res) * res};
}

}  // namespace

TerrainMap::TerrainMap(TerrainMapParams params, Vec2 center) : params_(params) {
  const int n = static_cast<int>(std::lround(params_.window / params_.resolution));
  grid_ = Grid2D<TerrainCell>(aligned_origin(center, params_.resolution, n), params_.resolution, n, n);
}

Vec2 TerrainMap::center() const {
  return grid_.origin() + 0.5 * Vec2(grid_.nx() * grid_.resolution(), grid_.ny() * grid_.resolution());
}

void TerrainMap::recenter(const Vec2& center) {
  const double res = grid_.resolution();
  const Vec2 origin = aligned_origin(center, res, grid_.nx());
  const int sx = static_cast<int>(std::lround((origin.x() - grid_.origin().x()) / res));
  const int sy = static_cast<int>(std::lround((origin.y() - grid_.origin().y()) / res));
  if (sx == 0 && sy == 0) return;
  Grid2D<TerrainCell> next(grid_.origin() + Vec2(sx * res, sy * res), res, grid_.nx(), grid_.ny());
  for (int j = 0; j < next.ny(); ++j) {
    for (int i = 0; i < next.nx(); ++i) {
      const int oi = i + sx;
      const int oj = j + sy;
      if (grid_.inside(oi, oj)) next.at(i, j) = grid_.at(oi, oj);
    }
  }
  grid_ = std::move(next);
}

std::size_t TerrainMap::known_count() const {
  return static_cast<std::size_t>(
      std::count_if(grid_.data().begin(), grid_.data().end(), [](const TerrainCell& c) { return c.known; }));
}

void update_terrain_map(TerrainMap& map, const PointCloud& scan, const Eigen::Isometry3d& sensor_pose) {
  const auto& p = map.params();
  const Vec2 robot = sensor_pose.translation().head<2>();
  const double sensor_z = sensor_pose.translation().z();
  if ((robot - map.center()).norm() > p.recenter_distance) {
    map.recenter(robot);
  }
  auto& grid = map.grid();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t n = grid.size();
  std::vector<double> lowest(n, kInf);
  std::vector<std::int32_t> cell_of(scan.size(), -1);
  std::vector<double> z(scan.size());
  const double range2 = p.max_range * p.max_range;
  for (std::size_t k = 0; k < scan.size(); ++k) {
    const Vec3 w = sensor_pose * scan.points[k];
    const double d2 = (w.head<2>() - robot).squaredNorm();
    if (d2 > range2) continue;
    if (w.z() > sensor_z + p.rise_margin + p.max_rise * std::sqrt(d2)) continue;
    const auto c = grid.find_cell(w.head<2>());
    if (!c) continue;
    const std::size_t idx = grid.linear(c->x, c->y);
    cell_of[k] = static_cast<std::int32_t>(idx);
    z[k] = w.z();
    lowest[idx] = std::min(lowest[idx], w.z());
  }
  std::vector<double> band_sum(n, 0.0);
  std::vector<int> band_count(n, 0);
  for (std::size_t k = 0; k < scan.size(); ++k) {
    const auto idx = cell_of[k];
    if (idx < 0) continue;
    if (z[k] <= lowest[idx] + p.band) {
      band_sum[idx] += z[k];
      ++band_count[idx];
    }
  }
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (band_count[idx] == 0) continue;
    const double obs = band_sum[idx] / band_count[idx];
    auto& cell = grid[idx];
    cell.elevation = cell.known ? (1.0 - p.alpha) * cell.elevation + p.alpha * obs : obs;
  }
  std::vector<double> top(n, -kInf);
  for (std::size_t k = 0; k < scan.size(); ++k) {
    const auto idx = cell_of[k];
    if (idx < 0) continue;
    const double h = z[k] - grid[idx].elevation;
    if (h <= p.body_height) top[idx] = std::max(top[idx], h);
  }
  for (std::size_t idx = 0; idx < n; ++idx) {
    if (band_count[idx] == 0) continue;
    auto& cell = grid[idx];
    const double obs = std::max(top[idx], 0.0);
    cell.obstacle = cell.known ? std::max((1.0 - p.alpha) * cell.obstacle + p.alpha * obs, obs) : obs;
    cell.known = true;
  }
}

}  // namespace sylva::estimation
