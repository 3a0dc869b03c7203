#pragma once

#include <cstdint>

#include "sylva/common/grid.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/parallel.hpp"
#include "sylva/estimation/terrain_map.hpp"

namespace sylva::autonomy {

struct Hinge {
  double low = 0.0;
  double high = 1.0;
  /// 1 at or below `low`, 0 at or above `high`, linear in between.
  double operator()(double v) const;
};

struct TraversabilityParams {
  Hinge slope{0.2617993877991494, 0.6108652381980153};  // 15 / 35 deg, rad
  Hinge roughness{0.03, 0.10};
  Hinge step{0.10, 0.25};
  Hinge obstacle{0.3, 0.5};
  double inflation_radius = 0.3;  // m; cells this close to a lethal cell become lethal
};

void to_json(Json& j, const TraversabilityParams& p);
void from_json(const Json& j, TraversabilityParams& p);

struct TraversabilityLayer {
  Grid2D<double> score;         // s_trav, meaningful on known cells only
  Grid2D<std::uint8_t> known;
};

/// Per known cell: slope from central differences, roughness as the 3x3
/// elevation standard deviation, step as the 3x3 max-min, and obstacle
/// clearance; s_trav is the product of their hinge penalties.
TraversabilityLayer score_traversability(const estimation::TerrainMap& map, const TraversabilityParams& params,
                                         ExecPolicy policy = ExecPolicy::Parallel);

struct CostParams {
  double w_trav = 1.0;
  double w_unkn = 1.0;
  double s_unkn = 0.3;

  void validate() const;
};

void to_json(Json& j, const CostParams& p);
void from_json(const Json& j, CostParams& p);

/// c = w_trav * (1 - s_trav) on known cells, w_unkn * s_unkn on unknown cells.
Grid2D<double> compute_cost(const TraversabilityLayer& layer, const CostParams& params);

}  // namespace sylva::autonomy
