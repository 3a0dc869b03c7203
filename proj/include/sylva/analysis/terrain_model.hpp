#pragma once

#include <optional>

#include "sylva/common/grid.hpp"

namespace sylva::analysis {

/// Gridded terrain heights with a per-cell confidence weight. Cells with
/// zero weight carry no information.
struct TerrainModel {
  Grid2D<double> height;
  Grid2D<double> weight;

  bool empty() const { return height.empty(); }
  /// Bilinear over the four surrounding cell centers when all are weighted,
  /// otherwise the height of the nearest weighted cell within `search` cells.
  std::optional<double> height_at(const Vec2& p, int search = 4) const;
  std::size_t weighted_cells() const;
};

}  // namespace sylva::analysis
