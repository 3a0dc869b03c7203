#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sylva/common/error.hpp"
#include "sylva/common/geometry.hpp"
#include "sylva/common/grid.hpp"
#include "sylva/common/json.hpp"

namespace sylva::sim {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

enum class PatchType { Bush, Damp };

std::string to_string(PatchType type);
PatchType patch_type_from_string(const std::string& s);

struct TerrainSpec {
  double amplitude = 0.3;            // m, peak of the harmonic relief
  double correlation_length = 12.0;  // m, shortest harmonic wavelength
  double mean_slope = 0.0;           // rad
  double slope_heading = 0.0;        // rad, uphill direction
  double resolution = 0.25;          // m, heightfield sample spacing
  double margin = 25.0;              // m, heightfield padding around the extent
};

struct TreeSpec {
  int count = 0;
  double min_spacing = 3.0;
  Range base_diameter{0.25, 0.55};
  double taper = 0.008;  // diameter loss per m of height
  Range height{14.0, 24.0};
  double lean_max = 0.0872;  // rad
  double knot_spacing = 1.0;
  Range crown_base_fraction{0.45, 0.6};
  Range crown_radius{1.5, 3.0};
};

struct PatchGroupSpec {
  int count = 0;
  Range radius{1.0, 2.0};
  PatchType type = PatchType::Bush;
};

struct WorldSpec {
  Rect extent{0.0, 0.0, 50.0, 50.0};
  TerrainSpec terrain;
  TreeSpec trees;
  std::vector<PatchGroupSpec> patches;
  std::uint64_t seed = 1;

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

void to_json(Json& j, const WorldSpec& spec);
void from_json(const Json& j, WorldSpec& spec);

struct StemKnot {
  double height = 0.0;    // above the base, m
  double diameter = 0.0;  // m
  Vec2 center = Vec2::Zero();  // horizontal stem center in the world frame
};

struct GroundTruthTree {
  int id = 0;
  Vec3 base = Vec3::Zero();
  std::vector<StemKnot> knots;
  double height = 0.0;
  double lean_direction = 0.0;
  double lean_angle = 0.0;
  double crown_base = 0.0;  // above the base
  double crown_radius = 0.0;

  double diameter_at(double h) const;
  Vec2 center_at(double h) const;
  double dbh() const { return diameter_at(1.3); }
};

struct Patch {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  PatchType type = PatchType::Bush;

  bool contains(const Vec2& p) const { return (p - center).squaredNorm() <= radius * radius; }
};

class PlacementExhausted : public Error {
 public:
  PlacementExhausted(int requested, int achieved)
      : Error("could only place " + std::to_string(achieved) + " of " + std::to_string(requested) +
              " trees at the requested spacing"),
        requested_(requested), achieved_(achieved) {}
  int requested() const { return requested_; }
  int achieved() const { return achieved_; }

 private:
  int requested_;
  int achieved_;
};

/// Ground truth. Immutable after generation; safe to share read-only.
class World {
 public:
  static constexpr double kBushHeight = 0.8;

  World() = default;

  const WorldSpec& spec() const { return spec_; }
  const std::vector<GroundTruthTree>& trees() const { return trees_; }
  const std::vector<Patch>& patches() const { return patches_; }
  /// Heightfield vertices; vertex (i, j) sits at origin + (i, j) * resolution.
  const Grid2D<double>& heightfield() const { return heightfield_; }
  /// Region covered by the heightfield. The robot must stay inside it.
  Rect bounds() const;
  /// Upper bound on the terrain gradient magnitude.
  double slope_bound() const { return slope_bound_; }
  double max_terrain_height() const { return max_height_; }
  int placement_shortfall() const { return shortfall_; }

  /// Bilinear terrain height; coordinates are clamped to the heightfield.
  double terrain_height(double x, double y) const;
  double terrain_height(const Vec2& p) const { return terrain_height(p.x(), p.y()); }
  Vec2 terrain_gradient(double x, double y) const;

  std::optional<std::size_t> patch_at(const Vec2& p, std::optional<PatchType> type = std::nullopt) const;
  bool in_damp(const Vec2& p) const { return patch_at(p, PatchType::Damp).has_value(); }
  bool in_bush(const Vec2& p) const { return patch_at(p, PatchType::Bush).has_value(); }

  bool operator==(const World&) const;

  /// Hand-built world for tests: flat or sloped terrain with explicit trees.
  static World from_parts(WorldSpec spec, Grid2D<double> heightfield, std::vector<GroundTruthTree> trees,
                          std::vector<Patch> patches);

 private:
  friend World generate_world(const WorldSpec& spec, bool allow_partial);
  void finalize_terrain();

  WorldSpec spec_;
  Grid2D<double> heightfield_;
  std::vector<GroundTruthTree> trees_;
  std::vector<Patch> patches_;
  double slope_bound_ = 0.0;
  double max_height_ = 0.0;
  int shortfall_ = 0;
};

/// Deterministic for a fixed spec. With `allow_partial`, a crowded extent
/// yields fewer trees (see World::placement_shortfall) instead of throwing.
World generate_world(const WorldSpec& spec, bool allow_partial = false);

/// Builds a tree whose stem is a linear-taper frustum stack.
GroundTruthTree make_tree(int id, const Vec3& base, double base_diameter, double taper, double height,
                          double lean_direction, double lean_angle, double knot_spacing, double crown_base,
                          double crown_radius);

}  // namespace sylva::sim
