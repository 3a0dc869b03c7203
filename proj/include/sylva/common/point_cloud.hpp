#pragma once

#include <cstdint>
#include <vector>

#include "sylva/common/geometry.hpp"

namespace sylva {

/// Ground-truth surface a simulated return came from. Real data carries
/// no labels; the simulator attaches them so filters can be scored.
enum class Surface : std::uint8_t { Unknown = 0, Terrain = 1, Stem = 2, Crown = 3, Patch = 4 };

struct PointLabel {
  Surface surface = Surface::Unknown;
  std::int32_t owner = -1;  // tree id or patch index, -1 for terrain

  bool operator==(const PointLabel&) const = default;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<PointLabel> labels;  // either empty or one per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_labels() const { return !labels.empty() && labels.size() == points.size(); }

  void reserve(std::size_t n, bool with_labels);
  void push_back(const Vec3& p) { points.push_back(p); }
  void push_back(const Vec3& p, PointLabel label) {
    points.push_back(p);
    labels.push_back(label);
  }
  void append(const PointCloud& other);

  bool operator==(const PointCloud&) const = default;
};

PointCloud transform_cloud(const PointCloud& cloud, const Eigen::Isometry3d& transform);
PointCloud transform_cloud(const PointCloud& cloud, const Pose4& transform);

/// Keeps the first point that falls into each cubic voxel of side `leaf`,
/// preserving input order. Deterministic for a given input.
PointCloud voxel_deduplicate(const PointCloud& cloud, double leaf);

}  // namespace sylva
