#pragma once

#include <vector>

#include "sylva/analysis/fitting.hpp"
#include "sylva/analysis/terrain_model.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/parallel.hpp"
#include "sylva/common/point_cloud.hpp"

namespace sylva::analysis {

struct SegmentParams {
  double slice_min = 1.0;  // normalized height, m
  double slice_max = 3.0;
  double link_distance = 0.3;
  double band = 0.1;  // kept distance from the cylinder surface, m
  std::size_t min_points = 50;
  std::size_t min_seed_points = 10;
  double min_radius = 0.025;
  double max_radius = 1.0;

  void validate() const;
};

void to_json(Json& j, const SegmentParams& p);
void from_json(const Json& j, SegmentParams& p);

struct TreeCandidate {
  PointCloud cloud;             // retained points, input frame
  std::vector<double> heights;  // normalized height per retained point
  Cylinder cylinder;
  Vec3 base = Vec3::Zero();  // axis at the terrain
  std::size_t seed_points = 0;
};

/// Horizontal connected components of `points` at `link` distance. Labels
/// follow first appearance in input order.
std::vector<int> link_components(const std::vector<Vec2>& points, double link);

/// Slice, seed, Voronoi-assign and cylinder-filter. Points the terrain
/// model cannot normalize are ignored.
std::vector<TreeCandidate> segment_trees(const PointCloud& cloud, const TerrainModel& terrain,
                                         const SegmentParams& params = {}, ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace sylva::analysis
