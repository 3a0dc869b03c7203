#include "sylva/analysis/cloth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace sylva::analysis {

namespace {

constexpr double kNone = -std::numeric_limits<double>::infinity();

}  // namespace

void ClothParams::validate() const {
  if (!(resolution > 0.0) || rigidness <= 0 || !(gravity_step > 0.0) || max_iterations <= 0 ||
      !(convergence > 0.0) || !(class_threshold > 0.0) || !(snap_radius > 0.0)) {
    throw ConfigError("cloth parameters must all be positive");
  }
}

void to_json(Json& j, const ClothParams& p) {
  j = Json{{"resolution", p.resolution},       {"rigidness", p.rigidness},
           {"gravity_step", p.gravity_step},   {"max_iterations", p.max_iterations},
           {"convergence", p.convergence},     {"class_threshold", p.class_threshold},
           {"snap_radius", p.snap_radius}};
}

void from_json(const Json& j, ClothParams& p) {
  ClothParams d;
  p.resolution = value_or(j, "resolution", d.resolution);
  p.rigidness = value_or(j, "rigidness", d.rigidness);
  p.gravity_step = value_or(j, "gravity_step", d.gravity_step);
  p.max_iterations = value_or(j, "max_iterations", d.max_iterations);
  p.convergence = value_or(j, "convergence", d.convergence);
  p.class_threshold = value_or(j, "class_threshold", d.class_threshold);
  p.snap_radius = value_or(j, "snap_radius", d.snap_radius);
  p.validate();
}

std::size_t ClothResult::ground_count() const {
  return static_cast<std::size_t>(std::count(ground.begin(), ground.end(), std::uint8_t{1}));
}

ClothResult fit_terrain_cloth(const PointCloud& cloud, const ClothParams& params, ExecPolicy policy) {
  params.validate();
  if (cloud.empty()) throw DegenerateTerrain("cloth filter: empty cloud");

  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  double top = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : cloud.points) {
    if (!p.allFinite()) throw DegenerateTerrain("cloth filter: non-finite point");
    min_x = std::min(min_x, p.x());
    min_y = std::min(min_y, p.y());
    max_x = std::max(max_x, p.x());
    max_y = std::max(max_y, p.y());
    top = std::max(top, -p.z());
  }

  const double res = params.resolution;
  const Vec2 origin(min_x - res, min_y - res);
  const int nx = static_cast<int>(std::floor((max_x - origin.x()) / res)) + 2;
  const int ny = static_cast<int>(std::floor((max_y - origin.y()) / res)) + 2;
  Grid2D<double> ihv(origin, res, nx, ny, kNone);
  Grid2D<double> nearest(origin, res, nx, ny, std::numeric_limits<double>::infinity());
  Grid2D<double> fallback(origin, res, nx, ny, kNone);

  // Collision heights of the inverted cloud: highest inverted point within
  // the snap radius, otherwise the horizontally nearest point in the cell.
  const double snap2 = params.snap_radius * params.snap_radius;
  for (const Vec3& p : cloud.points) {
    const CellIndex c = ihv.cell_of(p.head<2>());
    const double d2 = (ihv.center(c) - p.head<2>()).squaredNorm();
    const double inv = -p.z();
    if (d2 <= snap2) ihv.at(c) = std::max(ihv.at(c), inv);
    if (d2 < nearest.at(c) || (d2 == nearest.at(c) && inv > fallback.at(c))) {
      nearest.at(c) = d2;
      fallback.at(c) = inv;
    }
  }
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < ihv.size(); ++i) {
    if (ihv[i] == kNone) ihv[i] = fallback[i];
    if (ihv[i] != kNone) frontier.push_back(i);
  }
  // Empty cells take the mean of already-filled 4-neighbours, wave by wave.
  while (!frontier.empty()) {
    std::vector<std::size_t> wave;
    const std::size_t n = frontier.size();
    for (std::size_t k = 0; k < n; ++k) {
      const CellIndex c = ihv.unlinear(frontier.front());
      frontier.pop_front();
      const int dx[4] = {1, -1, 0, 0};
      const int dy[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int i = c.x + dx[d];
        const int j = c.y + dy[d];
        if (ihv.inside(i, j) && ihv.at(i, j) == kNone) wave.push_back(ihv.linear(i, j));
      }
    }
    std::sort(wave.begin(), wave.end());
    wave.erase(std::unique(wave.begin(), wave.end()), wave.end());
    std::vector<double> values(wave.size());
    for (std::size_t k = 0; k < wave.size(); ++k) {
      const CellIndex c = ihv.unlinear(wave[k]);
      double sum = 0.0;
      int count = 0;
      const int dx[4] = {1, -1, 0, 0};
      const int dy[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int i = c.x + dx[d];
        const int j = c.y + dy[d];
        if (ihv.inside(i, j) && ihv.at(i, j) != kNone) {
          sum += ihv.at(i, j);
          ++count;
        }
      }
      values[k] = sum / count;
    }
    for (std::size_t k = 0; k < wave.size(); ++k) {
      ihv[wave[k]] = values[k];
      frontier.push_back(wave[k]);
    }
  }

  const std::size_t n = ihv.size();
  std::vector<double> z(n, top + params.gravity_step);
  std::vector<double> next(n);
  std::vector<std::uint8_t> movable(n, 1);
  std::vector<double> moved(n, 0.0);
  const auto count = static_cast<std::ptrdiff_t>(n);

  ClothResult result;
  std::vector<double> prev(n);
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    for_each_index(policy, count, [&](std::ptrdiff_t i) {
      prev[i] = z[i];
      if (movable[i]) z[i] -= params.gravity_step;
    });
    for (int pass = 0; pass < params.rigidness; ++pass) {
      for_each_index(policy, count, [&](std::ptrdiff_t i) {
        if (!movable[i]) {
          next[i] = z[i];
          return;
        }
        const CellIndex c = ihv.unlinear(static_cast<std::size_t>(i));
        double sum = 0.0;
        int k = 0;
        if (c.x > 0) sum += z[i - 1], ++k;
        if (c.x + 1 < nx) sum += z[i + 1], ++k;
        if (c.y > 0) sum += z[i - nx], ++k;
        if (c.y + 1 < ny) sum += z[i + nx], ++k;
        next[i] = z[i] + 0.5 * (sum / k - z[i]);
      });
      z.swap(next);
    }
    for_each_index(policy, count, [&](std::ptrdiff_t i) {
      moved[i] = movable[i] ? std::abs(z[i] - prev[i]) : 0.0;
      if (movable[i] && z[i] <= ihv[i]) {
        z[i] = ihv[i];
        movable[i] = 0;
      }
    });
    result.iterations = iter + 1;
    double max_move = 0.0;
    bool any_movable = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!movable[i]) continue;
      any_movable = true;
      max_move = std::max(max_move, moved[i]);
    }
    if (!any_movable || (iter > 0 && max_move < params.convergence)) {
      result.converged = true;
      break;
    }
  }

  Grid2D<double> height(origin, res, nx, ny, 0.0);
  Grid2D<double> count_grid(origin, res, nx, ny, 0.0);
  for (std::size_t i = 0; i < n; ++i) height[i] = -z[i];
  TerrainModel cloth{height, Grid2D<double>(origin, res, nx, ny, 1.0)};

  result.ground.assign(cloud.size(), 0);
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const Vec3& p = cloud.points[k];
    const auto h = cloth.height_at(p.head<2>());
    if (h && std::abs(p.z() - *h) <= params.class_threshold) {
      result.ground[k] = 1;
      count_grid.at(count_grid.cell_of(p.head<2>())) += 1.0;
    }
  }
  if (result.ground_count() == 0) throw DegenerateTerrain("cloth filter: no point settled near the cloth");

  Grid2D<double> weight(origin, res, nx, ny, 0.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double w = count_grid.at(i, j);
      if (i > 0) w += 0.25 * count_grid.at(i - 1, j);
      if (i + 1 < nx) w += 0.25 * count_grid.at(i + 1, j);
      if (j > 0) w += 0.25 * count_grid.at(i, j - 1);
      if (j + 1 < ny) w += 0.25 * count_grid.at(i, j + 1);
      weight.at(i, j) = w;
    }
  }
  result.terrain = TerrainModel{std::move(height), std::move(weight)};
  return result;
}

}  // namespace sylva::analysis
