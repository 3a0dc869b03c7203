#include "sylva/analysis/inventory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>
#include <unordered_set>

namespace sylva::analysis {

void InventoryParams::validate() const {
  cloth.validate();
  segment.validate();
  if (!(merge_radius > 0.0) || coverage_bins <= 0 || !(voxel_leaf > 0.0) || !(terrain_resolution > 0.0) ||
      !(visibility.range > 0.0)) {
    throw ConfigError("invalid inventory parameters");
  }
}

void to_json(Json& j, const InventoryParams& p) {
  j = Json{{"cloth", p.cloth},
           {"segment", p.segment},
           {"stem", p.stem},
           {"visibility", {{"upper_elevation_deg", rad2deg(p.visibility.upper_elevation)}, {"range", p.visibility.range}}},
           {"merge_radius", p.merge_radius},
           {"coverage_bins", p.coverage_bins},
           {"voxel_leaf", p.voxel_leaf},
           {"terrain_resolution", p.terrain_resolution}};
}

void from_json(const Json& j, InventoryParams& p) {
  InventoryParams d;
  p.cloth = value_or(j, "cloth", d.cloth);
  p.segment = value_or(j, "segment", d.segment);
  p.stem = value_or(j, "stem", d.stem);
  p.visibility = d.visibility;
  if (j.contains("visibility")) {
    const Json& v = j.at("visibility");
    p.visibility.upper_elevation = deg2rad(value_or(v, "upper_elevation_deg", rad2deg(d.visibility.upper_elevation)));
    p.visibility.range = value_or(v, "range", d.visibility.range);
  }
  p.merge_radius = value_or(j, "merge_radius", d.merge_radius);
  p.coverage_bins = value_or(j, "coverage_bins", d.coverage_bins);
  p.voxel_leaf = value_or(j, "voxel_leaf", d.voxel_leaf);
  p.terrain_resolution = value_or(j, "terrain_resolution", d.terrain_resolution);
  p.validate();
}

int coverage_bin(const Vec2& v, int bins) {
  const double a = std::atan2(v.y(), v.x()) + std::numbers::pi;
  const int b = static_cast<int>(std::floor(a / (2.0 * std::numbers::pi) * bins));
  return std::clamp(b, 0, bins - 1);
}

ForestInventory::ForestInventory(InventoryParams params) : params_(std::move(params)) { params_.validate(); }

namespace {

struct VoxelKey {
  std::int64_t x, y, z;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelHash {
  std::size_t operator()(const VoxelKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
    h ^= static_cast<std::size_t>(k.y) * 19349663u;
    h ^= static_cast<std::size_t>(k.z) * 83492791u;
    return h;
  }
};

}  // namespace

void ForestInventory::rebuild(TreeInstance& tree) const {
  std::stable_sort(tree.fragments.begin(), tree.fragments.end(),
                   [](const Fragment& a, const Fragment& b) { return a.payload_id < b.payload_id; });
  const Fragment& first = tree.fragments.front();
  const Pose4 frame = anchors_.at(first.anchor_node);
  const Pose4 frame_inv = frame.inverse();

  // Union and deduplication happen in the first fragment's frame so a
  // global rigid motion of all anchors cannot change which points survive.
  PointCloud local;
  std::vector<double> heights;
  std::unordered_set<VoxelKey, VoxelHash> seen;
  const double leaf = params_.voxel_leaf;
  std::vector<Vec3> viewpoints;
  std::set<int> anchor_set;
  for (const Fragment& f : tree.fragments) {
    const bool same = f.anchor_node == first.anchor_node;
    const Pose4 rel = same ? Pose4::identity() : frame_inv * anchors_.at(f.anchor_node);
    const Pose4& to_map = anchors_.at(f.anchor_node);
    const bool labelled = f.cloud.has_labels();
    for (std::size_t i = 0; i < f.cloud.size(); ++i) {
      const Vec3 p = same ? f.cloud.points[i] : rel * f.cloud.points[i];
      const VoxelKey key{static_cast<std::int64_t>(std::floor(p.x() / leaf)),
                         static_cast<std::int64_t>(std::floor(p.y() / leaf)),
                         static_cast<std::int64_t>(std::floor(p.z() / leaf))};
      if (!seen.insert(key).second) continue;
      if (labelled) {
        local.push_back(p, f.cloud.labels[i]);
      } else {
        local.push_back(p);
      }
      heights.push_back(f.heights[i]);
    }
    for (const Vec3& v : f.viewpoints) viewpoints.push_back(to_map * v);
    anchor_set.insert(f.anchor_node);
  }
  tree.cloud = transform_cloud(local, frame);
  tree.heights = std::move(heights);
  tree.anchors.assign(anchor_set.begin(), anchor_set.end());
  tree.last_update_node = tree.fragments.back().anchor_node;

  const SegmentParams& seg = params_.segment;
  std::vector<Vec3> slice;
  double ground = 0.0;
  for (std::size_t i = 0; i < tree.cloud.size(); ++i) {
    if (tree.heights[i] >= seg.slice_min && tree.heights[i] <= seg.slice_max) {
      slice.push_back(tree.cloud.points[i]);
      ground += tree.cloud.points[i].z() - tree.heights[i];
    }
  }
  bool fitted = false;
  if (slice.size() >= 10) {
    try {
      Cylinder c = fit_cylinder(slice);
      if (c.radius >= seg.min_radius && c.radius <= seg.max_radius) {
        tree.cylinder = c;
        fitted = true;
      }
    } catch (const FitFailed&) {
    }
  }
  if (!fitted) {
    const Cylinder& c = first.cylinder;
    tree.cylinder = c;
    tree.cylinder.point = frame * c.point;
    tree.cylinder.direction = frame.isometry().linear() * c.direction;
  }
  if (!slice.empty()) {
    ground /= static_cast<double>(slice.size());
  } else {
    ground = 0.0;
    for (std::size_t i = 0; i < tree.cloud.size(); ++i) ground += tree.cloud.points[i].z() - tree.heights[i];
    ground /= static_cast<double>(std::max<std::size_t>(tree.cloud.size(), 1));
  }
  tree.position = tree.cylinder.at_height(ground);

  tree.circles.clear();
  tree.frustums.clear();
  tree.reconstructed = false;
  try {
    tree.circles = fit_circles_along_stem(tree.cloud.points, tree.heights, params_.stem);
    tree.frustums = reconstruct_frustums(tree.circles);
    tree.reconstructed = true;
  } catch (const ReconstructionFailed&) {
    tree.circles.clear();
  }
  tree.traits = estimate_traits(tree.circles, tree.heights, ground, tree.position.head<2>(), viewpoints, params_.stem,
                                params_.visibility);

  tree.coverage.clear();
  for (const Vec3& v : viewpoints) {
    const Vec2 d = v.head<2>() - tree.position.head<2>();
    if (d.norm() <= params_.visibility.range && d.squaredNorm() > 0.0) {
      tree.coverage.insert(coverage_bin(d, params_.coverage_bins));
    }
  }
}

void ForestInventory::merge_close_instances() {
  const double r2 = params_.merge_radius * params_.merge_radius;
  for (;;) {
    int keep = -1;
    int drop = -1;
    for (auto a = trees_.begin(); a != trees_.end() && keep < 0; ++a) {
      for (auto b = std::next(a); b != trees_.end(); ++b) {
        if ((a->second.position.head<2>() - b->second.position.head<2>()).squaredNorm() <= r2) {
          keep = a->first;
          drop = b->first;
          break;
        }
      }
    }
    if (keep < 0) return;
    TreeInstance& k = trees_.at(keep);
    for (Fragment& f : trees_.at(drop).fragments) k.fragments.push_back(std::move(f));
    trees_.erase(drop);
    rebuild(k);
  }
}

void ForestInventory::rebuild_terrain() {
  const double res = params_.terrain_resolution;
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  struct Sample {
    Vec2 p;
    double h;
    double w;
  };
  std::vector<Sample> samples;
  for (const TerrainTile& tile : tiles_) {
    const Pose4& pose = anchors_.at(tile.anchor_node);
    const TerrainModel& m = tile.model;
    for (int j = 0; j < m.height.ny(); ++j) {
      for (int i = 0; i < m.height.nx(); ++i) {
        const double w = m.weight.at(i, j);
        if (!(w > 0.0)) continue;
        const Vec2 c = m.height.center(i, j);
        const Vec3 p = pose * Vec3(c.x(), c.y(), m.height.at(i, j));
        samples.push_back({p.head<2>(), p.z(), w});
        min_x = std::min(min_x, p.x());
        min_y = std::min(min_y, p.y());
        max_x = std::max(max_x, p.x());
        max_y = std::max(max_y, p.y());
      }
    }
  }
  if (samples.empty()) {
    terrain_ = {};
    return;
  }
  const Vec2 origin(std::floor(min_x / res) * res, std::floor(min_y / res) * res);
  const int nx = static_cast<int>(std::floor((max_x - origin.x()) / res)) + 1;
  const int ny = static_cast<int>(std::floor((max_y - origin.y()) / res)) + 1;
  Grid2D<double> sum(origin, res, nx, ny, 0.0);
  Grid2D<double> weight(origin, res, nx, ny, 0.0);
  for (const Sample& s : samples) {
    CellIndex c = sum.cell_of(s.p);
    c.x = std::clamp(c.x, 0, nx - 1);
    c.y = std::clamp(c.y, 0, ny - 1);
    sum.at(c) += s.w * s.h;
    weight.at(c) += s.w;
  }
  Grid2D<double> height(origin, res, nx, ny, 0.0);
  for (std::size_t i = 0; i < height.size(); ++i) {
    if (weight[i] > 0.0) height[i] = sum[i] / weight[i];
  }
  terrain_ = TerrainModel{std::move(height), std::move(weight)};
}

void ForestInventory::aggregate(const std::vector<TreeCandidate>& candidates, const TerrainModel& tile,
                                int anchor_node, const Pose4& anchor_pose, const std::vector<Vec3>& viewpoints,
                                int payload_id) {
  anchors_.try_emplace(anchor_node, anchor_pose);
  const Pose4 pose = anchors_.at(anchor_node);
  const double r2 = params_.merge_radius * params_.merge_radius;
  std::set<int> touched;
  for (const TreeCandidate& c : candidates) {
    Fragment f;
    f.payload_id = payload_id;
    f.anchor_node = anchor_node;
    f.cloud = c.cloud;
    f.heights = c.heights;
    f.cylinder = c.cylinder;
    for (const Vec3& v : viewpoints) {
      if ((v.head<2>() - c.base.head<2>()).norm() <= params_.visibility.range) f.viewpoints.push_back(v);
    }
    const Vec2 base = (pose * c.base).head<2>();
    int match = -1;
    double best = r2;
    for (const auto& [id, tree] : trees_) {
      const double d = (tree.position.head<2>() - base).squaredNorm();
      if (d <= best) {
        best = d;
        match = id;
      }
    }
    if (match < 0) {
      match = next_id_++;
      trees_[match].id = match;
      trees_.at(match).position = pose * c.base;
    }
    trees_.at(match).fragments.push_back(std::move(f));
    touched.insert(match);
  }
  for (int id : touched) rebuild(trees_.at(id));
  merge_close_instances();
  if (!tile.empty()) tiles_.push_back({payload_id, anchor_node, tile});
  rebuild_terrain();
  payloads_.push_back(payload_id);
  ++revision_;
}

void ForestInventory::reindex_on_loop_closure(const std::map<int, Pose4>& old_poses,
                                              const std::map<int, Pose4>& new_poses) {
  std::set<int> moved;
  for (auto& [node, anchor] : anchors_) {
    auto o = old_poses.find(node);
    auto n = new_poses.find(node);
    if (o == old_poses.end() || n == new_poses.end() || o->second == n->second) continue;
    if (o->second == anchor) {
      anchor = n->second;
    } else {
      const Pose4 delta = n->second * o->second.inverse();
      anchor = delta * anchor;
      anchor.yaw = wrap_angle(anchor.yaw);
    }
    moved.insert(node);
  }
  if (!moved.empty()) {
    for (auto& [id, tree] : trees_) {
      const bool affected = std::any_of(tree.fragments.begin(), tree.fragments.end(),
                                        [&](const Fragment& f) { return moved.count(f.anchor_node) > 0; });
      if (affected) rebuild(tree);
    }
    merge_close_instances();
    rebuild_terrain();
  }
  ++revision_;
}

PayloadAnalysis process_payload(ForestInventory& inventory, const estimation::DataPayload& payload,
                                ExecPolicy policy) {
  PayloadAnalysis out;
  out.payload_id = payload.id;
  out.points = payload.cloud.size();
  std::vector<TreeCandidate> candidates;
  TerrainModel tile;
  if (!payload.cloud.empty()) {
    try {
      const ClothResult cloth = fit_terrain_cloth(payload.cloud, inventory.params().cloth, policy);
      out.ground_points = cloth.ground_count();
      out.cloth_iterations = cloth.iterations;
      tile = cloth.terrain;
      candidates = segment_trees(payload.cloud, tile, inventory.params().segment, policy);
    } catch (const DegenerateTerrain&) {
      out.degenerate = true;
    }
  } else {
    out.degenerate = true;
  }
  out.candidates = candidates.size();
  inventory.aggregate(candidates, tile, payload.anchor_node, payload.anchor_pose, payload.viewpoints, payload.id);
  return out;
}

namespace {

Json circle_json(const StemCircle& c) {
  return Json{{"height", c.height},   {"center", to_json_value(c.center)}, {"radius", c.radius},
              {"rms", c.rms},         {"arc_deg", c.arc_deg},              {"low_coverage", c.low_coverage}};
}

}  // namespace

Json inventory_json(const ForestInventory& inventory) {
  Json trees = Json::array();
  for (const auto& [id, t] : inventory.trees()) {
    Json circles = Json::array();
    for (const StemCircle& c : t.circles) circles.push_back(circle_json(c));
    Json frustums = Json::array();
    for (const Frustum& f : t.frustums) {
      frustums.push_back(Json{{"z0", f.z0},
                              {"z1", f.z1},
                              {"c0", to_json_value(f.c0)},
                              {"c1", to_json_value(f.c1)},
                              {"r0", f.r0},
                              {"r1", f.r1},
                              {"volume", f.volume()}});
    }
    Json traits{{"height", t.traits.height},
                {"dbh_extrapolated", t.traits.dbh_extrapolated},
                {"fov_limited", t.traits.fov_limited}};
    traits["dbh"] = t.traits.dbh ? Json(*t.traits.dbh) : Json(nullptr);
    trees.push_back(Json{{"id", id},
                         {"position", to_json_value(t.position)},
                         {"cylinder",
                          {{"point", to_json_value(t.cylinder.point)},
                           {"direction", to_json_value(t.cylinder.direction)},
                           {"radius", t.cylinder.radius},
                           {"rms", t.cylinder.rms}}},
                         {"circles", circles},
                         {"frustums", frustums},
                         {"volume", stem_volume(t.frustums)},
                         {"reconstructed", t.reconstructed},
                         {"traits", traits},
                         {"coverage", Json(std::vector<int>(t.coverage.begin(), t.coverage.end()))},
                         {"anchors", t.anchors},
                         {"last_update_node", t.last_update_node},
                         {"points", t.cloud.size()}});
  }
  const TerrainModel& terrain = inventory.terrain();
  Json terrain_json{{"resolution", terrain.empty() ? 0.0 : terrain.height.resolution()},
                    {"cells", terrain.weighted_cells()}};
  if (!terrain.empty()) {
    terrain_json["origin"] = to_json_value(terrain.height.origin());
    terrain_json["size"] = {terrain.height.nx(), terrain.height.ny()};
  }
  return Json{{"revision", inventory.revision()},
              {"payloads", inventory.payloads()},
              {"trees", trees},
              {"terrain", terrain_json}};
}

}  // namespace sylva::analysis
