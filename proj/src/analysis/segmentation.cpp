#include "sylva/analysis/segmentation.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

namespace sylva::analysis {

void SegmentParams::validate() const {
  if (!(slice_max > slice_min) || !(link_distance > 0.0) || !(band > 0.0) || min_seed_points < 3 ||
      !(min_radius > 0.0) || !(max_radius > min_radius)) {
    throw ConfigError("invalid segmentation parameters");
  }
}

void to_json(Json& j, const SegmentParams& p) {
  j = Json{{"slice", {p.slice_min, p.slice_max}},
           {"link_distance", p.link_distance},
           {"band", p.band},
           {"min_points", p.min_points},
           {"min_seed_points", p.min_seed_points},
           {"radius", {p.min_radius, p.max_radius}}};
}

void from_json(const Json& j, SegmentParams& p) {
  SegmentParams d;
  if (j.contains("slice")) {
    p.slice_min = j.at("slice").at(0).get<double>();
    p.slice_max = j.at("slice").at(1).get<double>();
  } else {
    p.slice_min = d.slice_min;
    p.slice_max = d.slice_max;
  }
  p.link_distance = value_or(j, "link_distance", d.link_distance);
  p.band = value_or(j, "band", d.band);
  p.min_points = value_or(j, "min_points", d.min_points);
  p.min_seed_points = value_or(j, "min_seed_points", d.min_seed_points);
  if (j.contains("radius")) {
    p.min_radius = j.at("radius").at(0).get<double>();
    p.max_radius = j.at("radius").at(1).get<double>();
  } else {
    p.min_radius = d.min_radius;
    p.max_radius = d.max_radius;
  }
  p.validate();
}

namespace {

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::int64_t cell_key(int x, int y) { return (static_cast<std::int64_t>(x) << 32) ^ static_cast<std::uint32_t>(y); }

}  // namespace

std::vector<int> link_components(const std::vector<Vec2>& points, double link) {
  const std::size_t n = points.size();
  DisjointSet ds(n);
  std::unordered_map<std::int64_t, std::vector<int>> buckets;
  std::vector<std::pair<int, int>> cells(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int cx = static_cast<int>(std::floor(points[i].x() / link));
    const int cy = static_cast<int>(std::floor(points[i].y() / link));
    cells[i] = {cx, cy};
    buckets[cell_key(cx, cy)].push_back(static_cast<int>(i));
  }
  const double link2 = link * link;
  for (std::size_t i = 0; i < n; ++i) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        auto it = buckets.find(cell_key(cells[i].first + dx, cells[i].second + dy));
        if (it == buckets.end()) continue;
        for (int j : it->second) {
          if (j > static_cast<int>(i) && (points[j] - points[i]).squaredNorm() <= link2) ds.unite(static_cast<int>(i), j);
        }
      }
    }
  }
  std::vector<int> labels(n);
  std::map<int, int> relabel;
  for (std::size_t i = 0; i < n; ++i) {
    const int root = ds.find(static_cast<int>(i));
    auto [it, inserted] = relabel.emplace(root, static_cast<int>(relabel.size()));
    labels[i] = it->second;
  }
  return labels;
}

std::vector<TreeCandidate> segment_trees(const PointCloud& cloud, const TerrainModel& terrain,
                                         const SegmentParams& params, ExecPolicy policy) {
  params.validate();
  const std::size_t n = cloud.size();
  constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> height(n, kNan);
  for_each_index(policy, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
    const Vec3& p = cloud.points[i];
    if (const auto g = terrain.height_at(p.head<2>())) height[i] = p.z() - *g;
  });

  std::vector<std::size_t> slice;
  std::vector<Vec2> slice_xy;
  for (std::size_t i = 0; i < n; ++i) {
    if (height[i] >= params.slice_min && height[i] <= params.slice_max) {
      slice.push_back(i);
      slice_xy.push_back(cloud.points[i].head<2>());
    }
  }
  if (slice.empty()) return {};

  const std::vector<int> labels = link_components(slice_xy, params.link_distance);
  const int components = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(components));
  for (std::size_t k = 0; k < slice.size(); ++k) members[labels[k]].push_back(slice[k]);

  struct Seed {
    Vec2 centroid;
    Cylinder cylinder;
    double ground = 0.0;
    std::size_t size = 0;
  };
  std::vector<Seed> seeds;
  for (const auto& m : members) {
    if (m.size() < params.min_seed_points) continue;
    std::vector<Vec3> pts;
    pts.reserve(m.size());
    Vec2 centroid = Vec2::Zero();
    double ground = 0.0;
    for (std::size_t i : m) {
      pts.push_back(cloud.points[i]);
      centroid += cloud.points[i].head<2>();
      ground += cloud.points[i].z() - height[i];
    }
    Seed s;
    s.centroid = centroid / static_cast<double>(m.size());
    s.ground = ground / static_cast<double>(m.size());
    s.size = m.size();
    try {
      s.cylinder = fit_cylinder(pts);
    } catch (const FitFailed&) {
      continue;
    }
    if (s.cylinder.radius < params.min_radius || s.cylinder.radius > params.max_radius) continue;
    seeds.push_back(s);
  }
  if (seeds.empty()) return {};

  std::vector<int> owner(n, -1);
  for_each_index(policy, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
    if (std::isnan(height[i])) return;
    const Vec3& p = cloud.points[i];
    double best = std::numeric_limits<double>::infinity();
    int best_seed = -1;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const double d = (p.head<2>() - seeds[s].centroid).squaredNorm();
      if (d < best) {
        best = d;
        best_seed = static_cast<int>(s);
      }
    }
    const Cylinder& c = seeds[best_seed].cylinder;
    if (std::abs(c.axis_distance(p) - c.radius) <= params.band) owner[i] = best_seed;
  });

  std::vector<TreeCandidate> out(seeds.size());
  const bool labelled = cloud.has_labels();
  for (std::size_t i = 0; i < n; ++i) {
    if (owner[i] < 0) continue;
    TreeCandidate& c = out[owner[i]];
    if (labelled) {
      c.cloud.push_back(cloud.points[i], cloud.labels[i]);
    } else {
      c.cloud.push_back(cloud.points[i]);
    }
    c.heights.push_back(height[i]);
  }
  std::vector<TreeCandidate> kept;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    TreeCandidate& c = out[s];
    if (c.cloud.size() < params.min_points) continue;
    c.cylinder = seeds[s].cylinder;
    c.seed_points = seeds[s].size;
    c.base = c.cylinder.at_height(seeds[s].ground);
    kept.push_back(std::move(c));
  }
  return kept;
}

}  // namespace sylva::analysis
