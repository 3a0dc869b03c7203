#pragma once

#include <filesystem>

#include "sylva/common/json.hpp"
#include "sylva/common/point_cloud.hpp"
#include "sylva/sim/world.hpp"

namespace sylva::sim {

WorldSpec load_world_spec(const std::filesystem::path& path);

/// Tree table: id, base, height, DBH, lean and the full knot list.
Json tree_table(const World& world);

/// Dense labelled sample of the ground truth: terrain vertices inside the
/// extent at `spacing`, stem rings every `spacing` up to the crown base.
PointCloud sample_world(const World& world, double spacing = 0.05);

/// Writes `world_cloud.ply` and `trees.json` into `dir`.
void export_world(const World& world, const std::filesystem::path& dir, double spacing = 0.05);

}  // namespace sylva::sim
