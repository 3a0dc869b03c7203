#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "sylva/analysis/cloth.hpp"
#include "sylva/analysis/segmentation.hpp"
#include "sylva/analysis/stem.hpp"
#include "sylva/common/json.hpp"
#include "sylva/estimation/payload.hpp"

namespace sylva::analysis {

struct InventoryParams {
  ClothParams cloth;
  SegmentParams segment;
  StemParams stem;
  Visibility visibility;
  double merge_radius = 1.0;
  int coverage_bins = 8;
  double voxel_leaf = 0.02;
  double terrain_resolution = 0.5;

  void validate() const;
};

void to_json(Json& j, const InventoryParams& p);
void from_json(const Json& j, InventoryParams& p);

/// Part of an instance observed in one payload, kept in its anchor frame.
struct Fragment {
  int payload_id = 0;
  int anchor_node = 0;
  PointCloud cloud;
  std::vector<double> heights;
  std::vector<Vec3> viewpoints;
  Cylinder cylinder;
};

struct TerrainTile {
  int payload_id = 0;
  int anchor_node = 0;
  TerrainModel model;  // anchor frame
};

struct TreeInstance {
  int id = 0;
  std::vector<Fragment> fragments;
  PointCloud cloud;             // map frame, voxel-deduplicated union
  std::vector<double> heights;  // normalized height per cloud point
  std::vector<int> anchors;
  Cylinder cylinder;            // map frame
  Vec3 position = Vec3::Zero(); // stem axis at the terrain
  std::vector<StemCircle> circles;
  std::vector<Frustum> frustums;
  Traits traits;
  bool reconstructed = false;
  std::set<int> coverage;
  int last_update_node = 0;
};

class ForestInventory {
 public:
  explicit ForestInventory(InventoryParams params = {});

  const InventoryParams& params() const { return params_; }
  const std::map<int, TreeInstance>& trees() const { return trees_; }
  const TerrainModel& terrain() const { return terrain_; }
  const std::vector<int>& payloads() const { return payloads_; }
  const std::vector<TerrainTile>& tiles() const { return tiles_; }
  const std::map<int, Pose4>& anchors() const { return anchors_; }
  std::uint64_t revision() const { return revision_; }

  /// Candidates and tile are expressed in the anchor frame; `anchor_pose`
  /// places that frame in the map.
  void aggregate(const std::vector<TreeCandidate>& candidates, const TerrainModel& tile, int anchor_node,
                 const Pose4& anchor_pose, const std::vector<Vec3>& viewpoints, int payload_id);

  /// Moves everything anchored to node n by new_n * old_n^-1 and merges
  /// instances that end up within the merge radius.
  void reindex_on_loop_closure(const std::map<int, Pose4>& old_poses, const std::map<int, Pose4>& new_poses);

 private:
  void rebuild(TreeInstance& tree) const;
  void merge_close_instances();
  void rebuild_terrain();

  InventoryParams params_;
  std::map<int, TreeInstance> trees_;
  TerrainModel terrain_;
  std::vector<int> payloads_;
  std::vector<TerrainTile> tiles_;
  std::map<int, Pose4> anchors_;
  std::uint64_t revision_ = 0;
  int next_id_ = 0;
};

struct PayloadAnalysis {
  int payload_id = 0;
  std::size_t points = 0;
  std::size_t ground_points = 0;
  std::size_t candidates = 0;
  int cloth_iterations = 0;
  bool degenerate = false;
};

/// Cloth filter, segmentation and aggregation of one payload.
PayloadAnalysis process_payload(ForestInventory& inventory, const estimation::DataPayload& payload,
                                ExecPolicy policy = ExecPolicy::Parallel);

int coverage_bin(const Vec2& from_tree_to_viewpoint, int bins);

Json inventory_json(const ForestInventory& inventory);

}  // namespace sylva::analysis
