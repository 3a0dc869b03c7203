#pragma once

#include "sylva/analysis/inventory.hpp"
#include "sylva/common/json.hpp"
#include "sylva/sim/world.hpp"

namespace sylva::service {

struct InventoryScore {
  int truth_trees = 0;
  int instances = 0;
  int detected = 0;         // distinct ground-truth trees with an instance within the match radius
  int false_positives = 0;  // instances with no ground-truth tree within the match radius
  int dbh_reported = 0;     // matched instances carrying a DBH
  int dbh_within = 0;       // of those, within the tolerance
  double dbh_fraction = 0.0;
  double dbh_mean_abs_error = 0.0;
  double position_rmse = 0.0;
};

void to_json(Json& j, const InventoryScore& s);

/// Scores an inventory against the world's ground truth. Each instance is
/// matched to its nearest ground-truth tree within `match_radius`.
InventoryScore score_inventory(const sim::World& world, const analysis::ForestInventory& inventory,
                               double match_radius = 1.0, double dbh_tolerance = 0.02);

}  // namespace sylva::service
