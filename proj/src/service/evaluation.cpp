#include "sylva/service/evaluation.hpp"

#include <cmath>
#include <set>

namespace sylva::service {

void to_json(Json& j, const InventoryScore& s) {
  j = {{"truth_trees", s.truth_trees},
       {"instances", s.instances},
       {"detected", s.detected},
       {"false_positives", s.false_positives},
       {"dbh_reported", s.dbh_reported},
       {"dbh_within_tolerance", s.dbh_within},
       {"dbh_fraction", s.dbh_fraction},
       {"dbh_mean_abs_error", s.dbh_mean_abs_error},
       {"position_rmse", s.position_rmse}};
}

InventoryScore score_inventory(const sim::World& world, const analysis::ForestInventory& inventory,
                               double match_radius, double dbh_tolerance) {
  InventoryScore s;
  const auto& truth = world.trees();
  s.truth_trees = static_cast<int>(truth.size());
  s.instances = static_cast<int>(inventory.trees().size());
  std::set<int> matched;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  int positioned = 0;
  for (const auto& [id, tree] : inventory.trees()) {
    const Vec2 p = tree.position.head<2>();
    int best = -1;
    double best_d = match_radius;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const double d = (truth[k].base.head<2>() - p).norm();
      if (d <= best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    if (best < 0) {
      ++s.false_positives;
      continue;
    }
    matched.insert(best);
    sq_sum += best_d * best_d;
    ++positioned;
    if (tree.traits.dbh) {
      ++s.dbh_reported;
      const double err = std::abs(*tree.traits.dbh - truth[static_cast<std::size_t>(best)].dbh());
      abs_sum += err;
      if (err <= dbh_tolerance) ++s.dbh_within;
    }
  }
  s.detected = static_cast<int>(matched.size());
  if (s.dbh_reported > 0) {
    s.dbh_fraction = static_cast<double>(s.dbh_within) / s.dbh_reported;
    s.dbh_mean_abs_error = abs_sum / s.dbh_reported;
  }
  if (positioned > 0) s.position_rmse = std::sqrt(sq_sum / positioned);
  return s;
}

}  // namespace sylva::service
