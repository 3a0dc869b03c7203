#include "sylva/autonomy/gdf.hpp"

#include <cmath>
#include <functional>
#include <queue>
#include <utility>
#include <vector>

#include "sylva/common/error.hpp"

namespace sylva::autonomy {

GeodesicField compute_gdf(const Grid2D<double>& cost, const Vec2& goal, double lethal, double length_weight) {
  const auto cell = cost.find_cell(goal);
  if (!cell) {
    throw Error("GDF goal lies outside the cost grid");
  }
  return compute_gdf(cost, *cell, lethal, length_weight);
}

GeodesicField compute_gdf(const Grid2D<double>& cost, CellIndex goal, double lethal, double length_weight) {
  if (!cost.inside(goal)) {
    throw Error("GDF goal lies outside the cost grid");
  }
  GeodesicField field{Grid2D<double>(cost.origin(), cost.resolution(), cost.nx(), cost.ny(), kUnreachable), goal,
                      false};
  if (cost.at(goal) >= lethal) {
    field.goal_blocked = true;
    return field;
  }
  const double res = cost.resolution();
  const double diag = res * std::sqrt(2.0);
  constexpr int kDx[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  constexpr int kDy[8] = {0, 0, 1, -1, 1, -1, 1, -1};

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  std::vector<std::uint8_t> done(cost.size(), 0);
  const std::size_t start = cost.linear(goal.x, goal.y);
  field.distance[start] = 0.0;
  open.emplace(0.0, start);
  while (!open.empty()) {
    const auto [d, idx] = open.top();
    open.pop();
    if (done[idx]) continue;
    done[idx] = 1;
    const CellIndex c = cost.unlinear(idx);
    const double ca = cost[idx];
    for (int k = 0; k < 8; ++k) {
      const int nx = c.x + kDx[k];
      const int ny = c.y + kDy[k];
      if (!cost.inside(nx, ny)) continue;
      const std::size_t nidx = cost.linear(nx, ny);
      const double cb = cost[nidx];
      if (cb >= lethal || done[nidx]) continue;
      const double nd = d + edge_weight(k < 4 ? res : diag, ca, cb, length_weight);
      if (nd < field.distance[nidx]) {
        field.distance[nidx] = nd;
        open.emplace(nd, nidx);
      }
    }
  }
  return field;
}

std::vector<std::int64_t> shortest_path_tree(const GeodesicField& field, const Grid2D<double>& cost,
                                             double length_weight) {
  const auto& d = field.distance;
  std::vector<std::int64_t> parent(d.size(), -1);
  const double res = d.resolution();
  for (std::size_t idx = 0; idx < d.size(); ++idx) {
    const CellIndex c = d.unlinear(idx);
    if (c == field.goal || !field.reachable(c)) continue;
    double best = kUnreachable;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const CellIndex n{c.x + dx, c.y + dy};
        if ((dx == 0 && dy == 0) || !field.reachable(n)) continue;
        const double step = (dx != 0 && dy != 0) ? res * std::sqrt(2.0) : res;
        const double v = d.at(n) + edge_weight(step, cost.at(c), cost.at(n), length_weight);
        if (v < best) {
          best = v;
          parent[idx] = static_cast<std::int64_t>(d.linear(n.x, n.y));
        }
      }
    }
  }
  return parent;
}

}  // namespace sylva::autonomy
