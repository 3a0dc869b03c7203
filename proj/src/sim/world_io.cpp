#include "sylva/sim/world_io.hpp"

#include <cmath>
#include <numbers>

#include "sylva/common/ply.hpp"

namespace sylva::sim {

WorldSpec load_world_spec(const std::filesystem::path& path) {
  WorldSpec spec = read_json_file(path).get<WorldSpec>();
  spec.validate();
  return spec;
}

Json tree_table(const World& world) {
  Json trees = Json::array();
  for (const auto& t : world.trees()) {
    Json knots = Json::array();
    for (const auto& k : t.knots) {
      knots.push_back({{"height", k.height}, {"diameter", k.diameter}, {"center", to_json_value(k.center)}});
    }
    trees.push_back({{"id", t.id},
                     {"base", to_json_value(t.base)},
                     {"height", t.height},
                     {"dbh", t.dbh()},
                     {"lean_direction", t.lean_direction},
                     {"lean_angle", t.lean_angle},
                     {"crown_base", t.crown_base},
                     {"crown_radius", t.crown_radius},
                     {"knots", knots}});
  }
  Json patches = Json::array();
  for (const auto& p : world.patches()) {
    patches.push_back({{"center", to_json_value(p.center)}, {"radius", p.radius}, {"type", to_string(p.type)}});
  }
  return {{"trees", trees}, {"patches", patches}, {"placement_shortfall", world.placement_shortfall()}};
}

PointCloud sample_world(const World& world, double spacing) {
  PointCloud cloud;
  const Rect e = world.spec().extent;
  const int nx = static_cast<int>(std::floor(e.width() / spacing)) + 1;
  const int ny = static_cast<int>(std::floor(e.height() / spacing)) + 1;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = e.min_x + i * spacing;
      const double y = e.min_y + j * spacing;
      cloud.push_back({x, y, world.terrain_height(x, y)}, {Surface::Terrain, -1});
    }
  }
  for (const auto& t : world.trees()) {
    for (double h = 0.0; h <= t.crown_base; h += spacing) {
      const double r = 0.5 * t.diameter_at(h);
      if (r <= 0.0) break;
      const Vec2 c = t.center_at(h);
      const int steps = std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * r / spacing)));
      for (int k = 0; k < steps; ++k) {
        const double a = 2.0 * std::numbers::pi * k / steps;
        cloud.push_back({c.x() + r * std::cos(a), c.y() + r * std::sin(a), t.base.z() + h}, {Surface::Stem, t.id});
      }
    }
  }
  return cloud;
}

void export_world(const World& world, const std::filesystem::path& dir, double spacing) {
  std::filesystem::create_directories(dir);
  write_ply(dir / "world_cloud.ply", sample_world(world, spacing));
  write_json_file(dir / "trees.json", tree_table(world));
}

}  // namespace sylva::sim
