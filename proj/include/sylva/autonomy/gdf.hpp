#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "sylva/common/grid.hpp"

namespace sylva::autonomy {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct GeodesicField {
  Grid2D<double> distance;  // kUnreachable where no path exists
  CellIndex goal;
  bool goal_blocked = false;

  bool reachable(CellIndex c) const { return distance.inside(c) && distance.at(c) < kUnreachable; }
};

/// Weight of the 8-connected move between neighbouring cells a and b.
inline double edge_weight(double step, double cost_a, double cost_b, double length_weight = 1.0) {
  return step * (length_weight + 0.5 * (cost_a + cost_b));
}

/// Exact Dijkstra on the 8-connected grid. Cells with cost >= `lethal` are
/// impassable; a goal on such a cell yields an all-unreachable field with
/// `goal_blocked` set. Throws if the goal lies outside the grid.
/// `length_weight` is the pure path-length term of the edge weight.
GeodesicField compute_gdf(const Grid2D<double>& cost, const Vec2& goal, double lethal, double length_weight = 1.0);
GeodesicField compute_gdf(const Grid2D<double>& cost, CellIndex goal, double lethal, double length_weight = 1.0);

/// Parent (linear index) of every reachable non-goal cell in the argmin
/// tree of the field, -1 elsewhere. Ties go to the first neighbour in a
/// fixed scan order.
std::vector<std::int64_t> shortest_path_tree(const GeodesicField& field, const Grid2D<double>& cost,
                                             double length_weight = 1.0);

}  // namespace sylva::autonomy
