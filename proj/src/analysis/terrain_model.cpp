#include "sylva/analysis/terrain_model.hpp"

#include <cmath>
#include <limits>

namespace sylva::analysis {

std::optional<double> TerrainModel::height_at(const Vec2& p, int search) const {
  if (height.empty()) return std::nullopt;
  const double res = height.resolution();
  const double fx = (p.x() - height.origin().x()) / res - 0.5;
  const double fy = (p.y() - height.origin().y()) / res - 0.5;
  const int ix = static_cast<int>(std::floor(fx));
  const int iy = static_cast<int>(std::floor(fy));
  if (height.inside(ix, iy) && height.inside(ix + 1, iy + 1) && weight.at(ix, iy) > 0.0 &&
      weight.at(ix + 1, iy) > 0.0 && weight.at(ix, iy + 1) > 0.0 && weight.at(ix + 1, iy + 1) > 0.0) {
    const double u = fx - ix;
    const double v = fy - iy;
    return (1 - v) * ((1 - u) * height.at(ix, iy) + u * height.at(ix + 1, iy)) +
           v * ((1 - u) * height.at(ix, iy + 1) + u * height.at(ix + 1, iy + 1));
  }
  const CellIndex c = height.cell_of(p);
  double best = std::numeric_limits<double>::infinity();
  std::optional<double> out;
  for (int dj = -search; dj <= search; ++dj) {
    for (int di = -search; di <= search; ++di) {
      const int i = c.x + di;
      const int j = c.y + dj;
      if (!height.inside(i, j) || weight.at(i, j) <= 0.0) continue;
      const double d = (height.center(i, j) - p).squaredNorm();
      if (d < best) {
        best = d;
        out = height.at(i, j);
      }
    }
  }
  return out;
}

std::size_t TerrainModel::weighted_cells() const {
  std::size_t n = 0;
  for (double w : weight.data()) n += w > 0.0 ? 1 : 0;
  return n;
}

}  // namespace sylva::analysis
