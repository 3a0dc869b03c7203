#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "sylva/common/geometry.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/point_cloud.hpp"

namespace sylva::estimation {

struct PayloadParams {
  double travel_threshold = 20.0;  // m
  double voxel_leaf = 0.02;        // m
  double crop_range = 15.0;        // horizontal range kept per scan, m
};

void to_json(Json& j, const PayloadParams& p);
void from_json(const Json& j, PayloadParams& p);

/// A gravity-aligned scan tagged with the odometry-frame pose it was taken at.
struct TaggedScan {
  PointCloud cloud;  // gravity-aligned sensor frame: x forward, z up
  Pose4 pose;        // sensor pose in the odometry frame
};

struct DataPayload {
  int id = 0;
  int anchor_node = 0;
  Pose4 anchor_pose;             // map-frame pose of the anchor node at emission
  PointCloud cloud;              // gravity-aligned anchor frame
  std::vector<Vec3> viewpoints;  // sensor positions in the anchor frame
  double distance = 0.0;         // travel covered, m
  double stamp = 0.0;            // emission time, s
};

/// Merges `scans` into the anchor frame given by `anchor_odom` (the anchor
/// node's odometry-frame pose). Returns nothing below the travel threshold
/// or when no point survives.
std::optional<DataPayload> accumulate_payload(const std::vector<TaggedScan>& scans, const Pose4& anchor_odom,
                                              double travel, const PayloadParams& params);

/// Streams scans in and emits a payload every `travel_threshold` metres.
class PayloadAccumulator {
 public:
  explicit PayloadAccumulator(PayloadParams params = {}) : params_(params) {}

  /// `travel` is the distance covered since the previous scan.
  void add_scan(TaggedScan scan, double travel);
  double pending_travel() const { return travel_; }
  std::size_t pending_scans() const { return scans_.size(); }

  /// Emits if the threshold has been reached; clears the buffer on emission.
  std::optional<DataPayload> emit(int anchor_node, const Pose4& anchor_odom, const Pose4& anchor_map, double stamp);
  /// Emits whatever is buffered regardless of distance (end of mission).
  std::optional<DataPayload> flush(int anchor_node, const Pose4& anchor_odom, const Pose4& anchor_map, double stamp);

 private:
  std::optional<DataPayload> build(int anchor_node, const Pose4& anchor_odom, const Pose4& anchor_map, double stamp);

  PayloadParams params_;
  std::vector<TaggedScan> scans_;
  double travel_ = 0.0;
  int next_id_ = 0;
};

/// Binary PLY `payload_<id>.ply` plus JSON sidecar `payload_<id>.json`.
void write_payload(const std::filesystem::path& dir, const DataPayload& payload);
DataPayload read_payload(const std::filesystem::path& sidecar);

}  // namespace sylva::estimation
