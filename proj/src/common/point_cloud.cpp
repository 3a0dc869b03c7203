#include "sylva/common/point_cloud.hpp"

#include <cmath>
#include <unordered_set>

namespace sylva {

void PointCloud::reserve(std::size_t n, bool with_labels) {
  points.reserve(n);
  if (with_labels) {
    labels.reserve(n);
  }
}

void PointCloud::append(const PointCloud& other) {
  const bool keep_labels = (empty() || has_labels()) && other.has_labels();
  if (!keep_labels) {
    labels.clear();
  }
  points.insert(points.end(), other.points.begin(), other.points.end());
  if (keep_labels) {
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  }
}

PointCloud transform_cloud(const PointCloud& cloud, const Eigen::Isometry3d& transform) {
  PointCloud out;
  out.labels = cloud.labels;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    out.points.push_back(transform * p);
  }
  return out;
}

PointCloud transform_cloud(const PointCloud& cloud, const Pose4& transform) {
  PointCloud out;
  out.labels = cloud.labels;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    out.points.push_back(transform * p);
  }
  return out;
}

PointCloud voxel_deduplicate(const PointCloud& cloud, double leaf) {
  if (leaf <= 0.0) {
    return cloud;
  }
  const bool labelled = cloud.has_labels();
  PointCloud out;
  out.reserve(cloud.size() / 2, labelled);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(cloud.size());
  const double inv = 1.0 / leaf;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    // 21 bits per axis, offset so negative coordinates stay distinct.
    const auto kx = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(p.x() * inv)) + (1 << 20)) & 0x1FFFFF;
    const auto ky = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(p.y() * inv)) + (1 << 20)) & 0x1FFFFF;
    const auto kz = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(p.z() * inv)) + (1 << 20)) & 0x1FFFFF;
    const std::uint64_t key = (kx << 42) | (ky << 21) | kz;
    if (seen.insert(key).second) {
      if (labelled) {
        out.push_back(p, cloud.labels[i]);
      } else {
        out.push_back(p);
      }
    }
  }
  return out;
}

}  // namespace sylva
