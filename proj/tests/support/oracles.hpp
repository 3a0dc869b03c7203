#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "sylva/common/grid.hpp"

namespace sylva::testing {

/// Bellman-Ford relaxation to a fixed point over the 8-connected grid. Uses
/// the same per-move weight expression as the planner so results compare
/// exactly.
inline std::vector<double> brute_force_distances(const Grid2D<double>& cost, CellIndex goal, double lethal) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(cost.size(), inf);
  if (cost.at(goal) >= lethal) return d;
  d[cost.linear(goal.x, goal.y)] = 0.0;
  const double res = cost.resolution();
  const double diag = res * std::sqrt(2.0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < cost.ny(); ++y) {
      for (int x = 0; x < cost.nx(); ++x) {
        const double cb = cost.at(x, y);
        if (cb >= lethal) continue;
        double best = d[cost.linear(x, y)];
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dx == 0 && dy == 0) || !cost.inside(x + dx, y + dy)) continue;
            const double du = d[cost.linear(x + dx, y + dy)];
            if (du == inf) continue;
            const double step = (dx != 0 && dy != 0) ? diag : res;
            const double cand = du + step * (1.0 + 0.5 * (cost.at(x + dx, y + dy) + cb));
            if (cand < best) best = cand;
          }
        }
        if (best < d[cost.linear(x, y)]) {
          d[cost.linear(x, y)] = best;
          changed = true;
        }
      }
    }
  }
  return d;
}

/// Random cost grid with a sprinkling of lethal cells.
template <class Rng>
Grid2D<double> random_cost_grid(Rng& rng, int n, double lethal_fraction, double lethal) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid2D<double> g(Vec2(-1.0, 2.0), 0.1, n, n, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = u(rng) < lethal_fraction ? lethal + u(rng) : u(rng) * 2.0;
  }
  return g;
}

}  // namespace sylva::testing
