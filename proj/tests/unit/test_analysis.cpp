#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "payloads.hpp"
#include "sylva/analysis/cloth.hpp"
#include "sylva/analysis/inventory.hpp"
#include "sylva/analysis/marteloscope.hpp"
#include "sylva/analysis/segmentation.hpp"
#include "sylva/analysis/stem.hpp"
#include "sylva/common/random.hpp"
#include "test_worlds.hpp"

using namespace sylva;
using namespace sylva::analysis;

namespace {

struct Score {
  double recall = 0.0;
  double precision = 0.0;
};

Score ground_score(const PointCloud& cloud, const std::vector<std::uint8_t>& ground) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const bool truth = cloud.labels[i].surface == Surface::Terrain;
    if (ground[i] && truth) ++tp;
    if (ground[i] && !truth) ++fp;
    if (!ground[i] && truth) ++fn;
  }
  return {static_cast<double>(tp) / static_cast<double>(tp + fn), static_cast<double>(tp) / static_cast<double>(tp + fp)};
}

std::vector<Vec3> cylinder_samples(Rng& rng, const Vec3& base, const Vec3& axis, double r, double length, int n,
                                   double noise, double arc = 2.0 * std::numbers::pi) {
  const Vec3 u = axis.unitOrthogonal();
  const Vec3 v = axis.cross(u);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) {
    const double t = draw_uniform(rng, 0.0, length);
    const double a = draw_uniform(rng, 0.0, arc);
    const double rr = r + noise * draw_normal(rng);
    out.push_back(base + t * axis + rr * (std::cos(a) * u + std::sin(a) * v));
  }
  return out;
}

/// Synthetic candidate: an upright stem of `radius` at `center` (anchor
/// frame) on flat ground at z = 0, sampled over the given bearing arc.
TreeCandidate stem_candidate(Rng& rng, const Vec2& center, double radius, double arc_start = 0.0,
                             double arc = 2.0 * std::numbers::pi) {
  TreeCandidate c;
  for (int i = 0; i < 1200; ++i) {
    const double h = draw_uniform(rng, 0.0, 4.0);
    const double a = arc_start + draw_uniform(rng, 0.0, arc);
    c.cloud.push_back(Vec3(center.x() + radius * std::cos(a), center.y() + radius * std::sin(a), h));
    c.heights.push_back(h);
  }
  c.cylinder.point = Vec3(center.x(), center.y(), 2.0);
  c.cylinder.radius = radius;
  c.base = Vec3(center.x(), center.y(), 0.0);
  c.seed_points = 600;
  return c;
}

TerrainModel flat_tile(double z = 0.0, double w = 1.0) {
  return TerrainModel{Grid2D<double>(Vec2(-10, -10), 0.5, 40, 40, z), Grid2D<double>(Vec2(-10, -10), 0.5, 40, 40, w)};
}

Pose4 apply(const Pose4& t, const Pose4& p) { return t * p; }

}  // namespace

TEST_CASE("cloth on a flat plane labels every point ground") {
  PointCloud cloud;
  for (int j = 0; j < 80; ++j) {
    for (int i = 0; i < 80; ++i) cloud.push_back(Vec3(i * 0.125, j * 0.125, 1.5));
  }
  const ClothResult r = fit_terrain_cloth(cloud);
  CHECK(r.converged);
  CHECK(r.ground_count() == cloud.size());
  for (double x : {0.5, 3.3, 7.7}) {
    const auto h = r.terrain.height_at(Vec2(x, 5.0));
    REQUIRE(h);
    CHECK(std::abs(*h - 1.5) < 0.1);
  }
}

TEST_CASE("cloth separates a stem from the plane") {
  Rng rng(3);
  PointCloud cloud;
  for (int k = 0; k < 20000; ++k) {
    cloud.push_back(Vec3(draw_uniform(rng, -5, 5), draw_uniform(rng, -5, 5), 0.005 * draw_normal(rng)),
                    {Surface::Terrain, -1});
  }
  for (const Vec3& p : cylinder_samples(rng, Vec3(1, 1, 0), Vec3::UnitZ(), 0.2, 6.0, 4000, 0.0)) {
    if (p.head<2>().allFinite()) cloud.push_back(p, {Surface::Stem, 0});
  }
  const ClothResult r = fit_terrain_cloth(cloud);
  std::size_t high_as_ground = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.labels[i].surface == Surface::Stem && cloud.points[i].z() > 0.1 && r.ground[i]) ++high_as_ground;
  }
  CHECK(high_as_ground == 0);
  CHECK(ground_score(cloud, r.ground).recall >= 0.99);
}

TEST_CASE("cloth follows a 10 degree slope") {
  Rng rng(5);
  const double s = std::tan(deg2rad(10.0));
  PointCloud cloud;
  for (int k = 0; k < 30000; ++k) {
    const double x = draw_uniform(rng, 0, 30);
    const double y = draw_uniform(rng, 0, 20);
    cloud.push_back(Vec3(x, y, s * x));
  }
  const ClothParams params;
  const ClothResult r = fit_terrain_cloth(cloud, params);
  double sq = 0.0;
  int n = 0;
  for (double x = 1.0; x < 29.0; x += 0.7) {
    for (double y = 1.0; y < 19.0; y += 0.7) {
      const auto h = r.terrain.height_at(Vec2(x, y));
      REQUIRE(h);
      sq += (*h - s * x) * (*h - s * x);
      ++n;
    }
  }
  CHECK(std::sqrt(sq / n) < params.class_threshold);
  CHECK(r.ground_count() == cloud.size());
}

TEST_CASE("cloth rejects degenerate input") {
  CHECK_THROWS_AS(fit_terrain_cloth(PointCloud{}), DegenerateTerrain);
  ClothParams bad;
  bad.rigidness = 0;
  PointCloud one;
  one.push_back(Vec3::Zero());
  CHECK_THROWS_AS(fit_terrain_cloth(one, bad), ConfigError);
}

TEST_CASE("cloth and segmentation serial and parallel agree bitwise") {
  sim::WorldSpec spec;
  spec.extent = {0, 0, 30, 20};
  spec.trees.count = 8;
  spec.terrain.mean_slope = deg2rad(8.0);
  spec.seed = 21;
  const sim::World world = sim::generate_world(spec);
  const auto payload = testing::straight_payload(world, Vec2(3, 10), Vec2(15, 10), 2.0, 21);
  const ClothResult a = fit_terrain_cloth(payload.cloud, {}, ExecPolicy::Serial);
  const ClothResult b = fit_terrain_cloth(payload.cloud, {}, ExecPolicy::Parallel);
  CHECK(a.ground == b.ground);
  CHECK(a.terrain.height == b.terrain.height);
  CHECK(a.iterations == b.iterations);

  const auto sa = segment_trees(payload.cloud, a.terrain, {}, ExecPolicy::Serial);
  const auto sb = segment_trees(payload.cloud, a.terrain, {}, ExecPolicy::Parallel);
  REQUIRE(sa.size() == sb.size());
  CHECK_FALSE(sa.empty());
  for (std::size_t k = 0; k < sa.size(); ++k) {
    CHECK(sa[k].cloud.points == sb[k].cloud.points);
    CHECK(sa[k].heights == sb[k].heights);
    CHECK(sa[k].base == sb[k].base);
    CHECK(sa[k].cylinder.radius == sb[k].cylinder.radius);
  }
}

TEST_CASE("cloth quality on labelled simulated payloads") {
  for (double slope_deg : {0.0, 8.0, 15.0}) {
    for (std::uint64_t seed : {1u, 2u}) {
      sim::WorldSpec spec;
      spec.extent = {0, 0, 40, 30};
      spec.trees.count = 25;
      spec.terrain.mean_slope = deg2rad(slope_deg);
      spec.terrain.slope_heading = 0.7;
      spec.patches = {{3, {1.0, 2.0}, sim::PatchType::Bush}};
      spec.seed = seed;
      const sim::World world = sim::generate_world(spec);
      const auto payload = testing::straight_payload(world, Vec2(8, 15), Vec2(28, 15), 1.0, seed);
      const ClothResult r = fit_terrain_cloth(payload.cloud);
      const Score s = ground_score(payload.cloud, r.ground);
      CAPTURE(slope_deg);
      CAPTURE(seed);
      CHECK(s.recall >= 0.99);
      CHECK(s.precision >= 0.95);
    }
  }
}

TEST_CASE("Kasa fit is exact on noise-free circles") {
  for (double start : {0.0, 1.0, 2.5}) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 30; ++i) {
      const double a = start + i * 0.2;
      pts.emplace_back(3.2 + 0.15 * std::cos(a), -1.7 + 0.15 * std::sin(a));
    }
    const Circle k = fit_circle_kasa(pts);
    CHECK(std::abs(k.center.x() - 3.2) < 1e-9);
    CHECK(std::abs(k.center.y() + 1.7) < 1e-9);
    CHECK(std::abs(k.radius - 0.15) < 1e-9);
    const Circle g = fit_circle(pts);
    CHECK(std::abs(g.radius - 0.15) < 1e-9);
  }
  CHECK_THROWS_AS(fit_circle_kasa({Vec2(0, 0), Vec2(1, 1)}), FitFailed);
  CHECK_THROWS_AS(fit_circle_kasa({Vec2(0, 0), Vec2(1, 1), Vec2(2, 2), Vec2(3, 3)}), FitFailed);
}

TEST_CASE("geometric refinement never increases RMS") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const double r = draw_uniform(rng, 0.05, 0.5);
    const double arc = draw_uniform(rng, 0.5, 2.0 * std::numbers::pi);
    const double noise = draw_uniform(rng, 0.0, 0.02);
    std::vector<Vec2> pts;
    for (int i = 0; i < 40; ++i) {
      const double a = draw_uniform(rng, 0.0, arc);
      const double rr = r + noise * draw_normal(rng);
      pts.emplace_back(rr * std::cos(a), rr * std::sin(a));
    }
    Circle k;
    try {
      k = fit_circle_kasa(pts);
    } catch (const FitFailed&) {
      continue;
    }
    const Circle g = refine_circle(pts, k);
    CHECK(g.rms <= k.rms);
  }
}

TEST_CASE("arc coverage of a partial band is flagged") {
  std::vector<Vec3> pts;
  std::vector<double> h;
  for (int band = 0; band < 3; ++band) {
    for (int i = 0; i < 40; ++i) {
      const double a = deg2rad(120.0) * i / 39.0;
      pts.emplace_back(0.2 * std::cos(a), 0.2 * std::sin(a), 0.1 + 0.5 * band);
      h.push_back(0.1 + 0.5 * band);
    }
  }
  const auto circles = fit_circles_along_stem(pts, h);
  REQUIRE(circles.size() == 3);
  for (const auto& c : circles) {
    CHECK(c.arc_deg == doctest::Approx(120.0).epsilon(1e-9));
    CHECK(c.low_coverage);
  }
}

TEST_CASE("cylinder fit recovers exact and noisy cylinders") {
  Rng rng(8);
  const auto exact = cylinder_samples(rng, Vec3(2, 3, 0), Vec3::UnitZ(), 0.2, 2.0, 300, 0.0);
  const Cylinder c = fit_cylinder(exact);
  CHECK(std::abs(c.radius - 0.2) < 1e-6);
  CHECK(c.rms < 1e-6);

  int within = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng r(1000 + seed);
    const auto pts = cylinder_samples(r, Vec3(0, 0, 1), Vec3::UnitZ(), 0.2, 2.0, 300, 0.005);
    const Cylinder f = fit_cylinder(pts);
    within += std::abs(f.radius - 0.2) <= 0.003 ? 1 : 0;
    CHECK(f.rms == doctest::Approx(0.005).epsilon(0.2));
  }
  CHECK(within == 100);

  const Vec3 axis = Vec3(std::sin(deg2rad(10.0)) * std::cos(0.4), std::sin(deg2rad(10.0)) * std::sin(0.4),
                         std::cos(deg2rad(10.0)));
  const auto tilted = cylinder_samples(rng, Vec3(1, 1, 0), axis, 0.25, 3.0, 500, 0.002);
  const Cylinder t = fit_cylinder(tilted);
  CHECK(rad2deg(std::acos(std::min(1.0, t.direction.dot(axis)))) < 1.0);
}

TEST_CASE("cylinder fit input errors") {
  std::vector<Vec3> few(5, Vec3::Zero());
  CHECK_THROWS_AS(fit_cylinder(few), FitFailed);
  std::vector<Vec3> line;
  for (int i = 0; i < 20; ++i) line.emplace_back(i * 0.1, 0.0, i * 0.05);
  CHECK_THROWS_AS(fit_cylinder(line), FitFailed);
}

TEST_CASE("band circles match a tapered stem") {
  const sim::GroundTruthTree tree = testing::upright_tree(0, 0.0, 0.0, 0.0, 0.40, 0.01, 15.0);
  std::vector<Vec3> pts;
  std::vector<double> h;
  for (int k = 0; k < 6000; ++k) {
    const double z = 0.001 + 5.0 * k / 6000.0;
    const double a = k * 2.399963;
    const double r = tree.diameter_at(z) / 2.0;
    const Vec2 c = tree.center_at(z);
    pts.emplace_back(c.x() + r * std::cos(a), c.y() + r * std::sin(a), z);
    h.push_back(z);
  }
  const auto circles = fit_circles_along_stem(pts, h);
  REQUIRE(circles.size() == 10);
  for (const auto& c : circles) {
    CHECK(std::abs(c.radius - tree.diameter_at(c.height) / 2.0) < 0.005);
  }
  CHECK_THROWS_AS(fit_circles_along_stem({pts[0]}, {h[0]}), ReconstructionFailed);
}

TEST_CASE("frustum reconstruction and volume") {
  std::vector<StemCircle> two(2);
  two[0].height = 0.0;
  two[0].radius = 0.2;
  two[1].height = 1.0;
  two[1].radius = 0.1;
  const auto f = reconstruct_frustums(two);
  REQUIRE(f.size() == 1);
  const double expected = std::numbers::pi * (0.04 + 0.02 + 0.01) / 3.0;
  CHECK(std::abs(f[0].volume() - expected) < 1e-9);
  two[1].center = Vec2(0.3, -0.2);
  CHECK(std::abs(reconstruct_frustums(two)[0].volume() - expected) < 1e-9);

  std::vector<StemCircle> many(7);
  for (int i = 0; i < 7; ++i) {
    many[i].height = 0.25 + 0.5 * i;
    many[i].radius = 0.2 - 0.01 * i;
  }
  CHECK(reconstruct_frustums(many).size() == 6);
  std::swap(many[2], many[3]);
  CHECK_THROWS_AS(reconstruct_frustums(many), ReconstructionFailed);
  CHECK_THROWS_AS(reconstruct_frustums({many[0]}), ReconstructionFailed);
}

TEST_CASE("DBH interpolation, extrapolation and absence") {
  StemParams params;
  std::vector<StemCircle> c(2);
  c[0].height = 1.0;
  c[0].radius = 0.16;
  c[1].height = 2.0;
  c[1].radius = 0.14;
  bool extra = true;
  auto d = diameter_at_breast_height(c, params, &extra);
  REQUIRE(d);
  CHECK(*d == doctest::Approx(0.308).epsilon(1e-12));
  CHECK_FALSE(extra);

  c[0].height = 1.6;
  c[1].height = 2.1;
  d = diameter_at_breast_height(c, params, &extra);
  REQUIRE(d);
  CHECK(extra);
  CHECK(*d == doctest::Approx(2.0 * (0.16 + (1.3 - 1.6) / 0.5 * (0.14 - 0.16))));

  c[0].height = 2.0;
  c[1].height = 2.5;
  CHECK_FALSE(diameter_at_breast_height(c, params));
  c[0].height = 0.25;
  c[1].height = 0.75;
  CHECK_FALSE(diameter_at_breast_height(c, params));
}

TEST_CASE("FOV-truncated stem height is flagged") {
  // Upper beam at atan(7.2 / 5): from 5 m away the sensor at 0.8 m sees up
  // to 8 m on a 20 m tree.
  const auto tree = testing::upright_tree(0, 5.0, 0.0, 0.0, 0.4, 0.008, 20.0);
  const sim::World world = testing::plane_world({-10, -10, 20, 10}, {tree});
  sim::LidarSpec lidar;
  const double upper = rad2deg(std::atan2(7.2, 5.0));
  lidar.vertical_center_deg = (upper - 30.0) / 2.0;
  lidar.vertical_fov_deg = upper + 30.0;
  lidar.channels = 96;
  lidar.horizontal_resolution_deg = 0.25;
  lidar.range_noise = 0.0;
  auto payload = testing::straight_payload(world, Vec2(0, 0), Vec2(0, 0), 1.0, 4, lidar);
  const ClothResult cloth = fit_terrain_cloth(payload.cloud);
  const auto candidates = segment_trees(payload.cloud, cloth.terrain);
  REQUIRE(candidates.size() == 1);
  const auto& cand = candidates[0];
  const auto circles = fit_circles_along_stem(cand.cloud.points, cand.heights);
  Visibility vis;
  vis.upper_elevation = deg2rad(upper);
  vis.range = 15.0;
  const Traits t = estimate_traits(circles, cand.heights, 0.0, cand.base.head<2>(), payload.viewpoints, {}, vis);
  CHECK(t.height == doctest::Approx(8.0).epsilon(0.03));
  CHECK(t.fov_limited);
  const Traits open = estimate_traits(circles, cand.heights, 0.0, cand.base.head<2>(), payload.viewpoints, {},
                                      Visibility{deg2rad(80.0), 40.0});
  CHECK_FALSE(open.fov_limited);
}

TEST_CASE("segmentation of a single tree") {
  const auto tree = testing::upright_tree(0, 6.0, 2.0, 0.0, 0.30);
  const sim::World world = testing::plane_world({-10, -10, 20, 15}, {tree});
  const auto payload = testing::straight_payload(world, Vec2(0, 0), Vec2(10, 0), 1.0, 9);
  const ClothResult cloth = fit_terrain_cloth(payload.cloud);
  const auto candidates = segment_trees(payload.cloud, cloth.terrain);
  REQUIRE(candidates.size() == 1);
  CHECK(std::abs(candidates[0].cylinder.radius - 0.15) <= 0.01);
  CHECK((candidates[0].base.head<2>() - Vec2(6.0, 2.0)).norm() < 0.05);
  CHECK(candidates[0].cloud.size() >= 50);
}

TEST_CASE("segmentation of two trees gives disjoint cells") {
  const auto a = testing::upright_tree(0, 4.0, 3.0, 0.0, 0.35);
  const auto b = testing::upright_tree(1, 9.0, 3.0, 0.0, 0.30);
  const sim::World world = testing::plane_world({-10, -10, 25, 15}, {a, b});
  const auto payload = testing::straight_payload(world, Vec2(0, 0), Vec2(12, 0), 1.0, 10);
  const ClothResult cloth = fit_terrain_cloth(payload.cloud);
  const auto candidates = segment_trees(payload.cloud, cloth.terrain);
  REQUIRE(candidates.size() == 2);
  for (const auto& c : candidates) {
    const int owner = (c.base.head<2>() - Vec2(4, 3)).norm() < 1.0 ? 0 : 1;
    std::size_t foreign = 0;
    for (const auto& l : c.cloud.labels) foreign += l.surface != Surface::Terrain && l.owner != owner ? 1 : 0;
    CHECK(foreign == 0);
  }
}

TEST_CASE("slice containing only high points yields no candidates") {
  PointCloud cloud;
  Rng rng(2);
  for (int k = 0; k < 5000; ++k) cloud.push_back(Vec3(draw_uniform(rng, 0, 10), draw_uniform(rng, 0, 10), draw_uniform(rng, 3.5, 9)));
  CHECK(segment_trees(cloud, flat_tile()).empty());
  CHECK(segment_trees(PointCloud{}, flat_tile()).empty());
}

TEST_CASE("link components") {
  const std::vector<Vec2> pts{{0, 0}, {0.2, 0}, {0.4, 0}, {2, 2}, {0.6, 0.1}, {2.25, 2}};
  const auto labels = link_components(pts, 0.3);
  CHECK(labels == std::vector<int>{0, 0, 0, 1, 0, 1});
}

TEST_CASE("segmentation identity on a generated forest") {
  sim::WorldSpec spec;
  spec.extent = {0, 0, 40, 30};
  spec.trees.count = 30;
  spec.terrain.mean_slope = deg2rad(6.0);
  spec.patches = {{3, {1.0, 2.0}, sim::PatchType::Bush}};
  spec.seed = 44;
  const sim::World world = sim::generate_world(spec);
  const auto payload = testing::straight_payload(world, Vec2(5, 15), Vec2(35, 15), 1.0, 44);
  const ClothResult cloth = fit_terrain_cloth(payload.cloud);
  const auto candidates = segment_trees(payload.cloud, cloth.terrain);
  CHECK(candidates.size() >= 10);
  std::set<int> matched;
  for (const auto& c : candidates) {
    const Vec2 base = (payload.anchor_pose * c.base).head<2>();
    int hits = 0;
    int which = -1;
    for (const auto& t : world.trees()) {
      if ((t.base.head<2>() - base).norm() <= 1.0) {
        ++hits;
        which = t.id;
      }
    }
    CHECK(hits == 1);
    CHECK(matched.insert(which).second);
    std::size_t patch = 0;
    for (const auto& l : c.cloud.labels) patch += l.surface == Surface::Patch ? 1 : 0;
    CHECK(patch * 2 < c.cloud.size());
  }
}

TEST_CASE("two payloads of the same tree aggregate into one instance") {
  Rng rng(1);
  ForestInventory inv;
  const Pose4 p0(0, 0, 0, 0);
  const Pose4 p1(10, 0, 0, 0);
  inv.aggregate({stem_candidate(rng, Vec2(5, 3), 0.2, 0.0, 3.0)}, flat_tile(), 0, p0, {Vec3(0, 0, 0.8)}, 0);
  inv.aggregate({stem_candidate(rng, Vec2(-5, 3), 0.2, 3.0, 3.0)}, flat_tile(), 1, p1, {Vec3(0, 0, 0.8)}, 1);
  REQUIRE(inv.trees().size() == 1);
  const TreeInstance& t = inv.trees().begin()->second;
  CHECK(t.anchors == std::vector<int>{0, 1});
  CHECK(t.coverage.size() >= 2);
  CHECK(inv.revision() == 2);
  REQUIRE(t.traits.dbh);
  CHECK(*t.traits.dbh == doctest::Approx(0.4).epsilon(1e-3));

  inv.aggregate({stem_candidate(rng, Vec2(10, 3), 0.2)}, flat_tile(), 2, p0, {}, 2);
  CHECK(inv.trees().size() == 2);
}

TEST_CASE("terrain cells merge as a weighted average") {
  ForestInventory inv;
  inv.aggregate({}, flat_tile(0.0, 1.0), 0, Pose4::identity(), {}, 0);
  inv.aggregate({}, flat_tile(0.4, 3.0), 1, Pose4::identity(), {}, 1);
  const auto h = inv.terrain().height_at(Vec2(0.1, 0.1));
  REQUIRE(h);
  CHECK(*h == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("identity reindex leaves the inventory unchanged") {
  Rng rng(4);
  ForestInventory inv;
  inv.aggregate({stem_candidate(rng, Vec2(3, 1), 0.2), stem_candidate(rng, Vec2(-4, 2), 0.15)}, flat_tile(), 0,
                Pose4(1, 2, 0, 0.3), {Vec3(0, 0, 0.8)}, 0);
  Json before = inventory_json(inv);
  inv.reindex_on_loop_closure(inv.anchors(), inv.anchors());
  Json after = inventory_json(inv);
  CHECK(after["revision"].get<int>() == before["revision"].get<int>() + 1);
  before.erase("revision");
  after.erase("revision");
  CHECK(before.dump() == after.dump());
}

TEST_CASE("loop-closure correction merges duplicates") {
  Rng rng(6);
  ForestInventory inv;
  inv.aggregate({stem_candidate(rng, Vec2(5, 0), 0.2)}, flat_tile(), 0, Pose4(0, 0, 0, 0), {}, 0);
  inv.aggregate({stem_candidate(rng, Vec2(5, 0), 0.2)}, flat_tile(), 1, Pose4(1.5, 0, 0, 0), {}, 1);
  REQUIRE(inv.trees().size() == 2);
  std::map<int, Pose4> corrected = inv.anchors();
  corrected[1] = Pose4(0.4, 0, 0, 0);
  inv.reindex_on_loop_closure(inv.anchors(), corrected);
  CHECK(inv.trees().size() == 1);
}

TEST_CASE("global translation moves every tree identically") {
  Rng rng(7);
  ForestInventory inv;
  inv.aggregate({stem_candidate(rng, Vec2(3, 1), 0.2), stem_candidate(rng, Vec2(-4, 2), 0.15)}, flat_tile(), 0,
                Pose4(1, 2, 0, 0.3), {}, 0);
  std::vector<Vec3> before;
  for (const auto& [id, t] : inv.trees()) before.push_back(t.position);
  std::map<int, Pose4> moved = inv.anchors();
  for (auto& [n, p] : moved) p.t += Vec3(3.0, -2.0, 0.5);
  inv.reindex_on_loop_closure(inv.anchors(), moved);
  std::size_t k = 0;
  for (const auto& [id, t] : inv.trees()) {
    CHECK((t.position - before[k] - Vec3(3.0, -2.0, 0.5)).norm() < 1e-9);
    ++k;
  }
}

TEST_CASE("rigid motion of payloads and poses is equivariant") {
  sim::WorldSpec spec;
  spec.extent = {0, 0, 40, 30};
  spec.trees.count = 20;
  spec.seed = 12;
  const sim::World world = sim::generate_world(spec);
  auto p0 = testing::straight_payload(world, Vec2(5, 10), Vec2(20, 10), 1.5, 12, {}, 0, 0);
  auto p1 = testing::straight_payload(world, Vec2(20, 10), Vec2(35, 10), 1.5, 13, {}, 1, 1);
  const Pose4 motion(4.0, -7.0, 0.0, 0.9);
  ForestInventory a;
  ForestInventory b;
  for (auto* p : {&p0, &p1}) {
    process_payload(a, *p);
    auto moved = *p;
    moved.anchor_pose = apply(motion, p->anchor_pose);
    process_payload(b, moved);
  }
  REQUIRE(a.trees().size() == b.trees().size());
  CHECK(a.trees().size() >= 5);
  auto ib = b.trees().begin();
  for (const auto& [id, t] : a.trees()) {
    const Vec3 expected = motion * t.position;
    CHECK((ib->second.position - expected).norm() < 1e-9);
    CHECK(ib->second.traits.dbh.has_value() == t.traits.dbh.has_value());
    if (t.traits.dbh) CHECK(std::abs(*ib->second.traits.dbh - *t.traits.dbh) < 1e-9);
    CHECK(std::abs(ib->second.traits.height - t.traits.height) < 1e-9);
    ++ib;
  }
}

TEST_CASE("feeding a payload twice keeps traits") {
  sim::WorldSpec spec;
  spec.extent = {0, 0, 30, 20};
  spec.trees.count = 10;
  spec.seed = 31;
  const sim::World world = sim::generate_world(spec);
  const auto payload = testing::straight_payload(world, Vec2(5, 10), Vec2(20, 10), 1.5, 31);
  ForestInventory inv;
  process_payload(inv, payload);
  std::map<int, Traits> first;
  for (const auto& [id, t] : inv.trees()) first[id] = t.traits;
  process_payload(inv, payload);
  REQUIRE(inv.trees().size() == first.size());
  for (const auto& [id, t] : inv.trees()) {
    const Traits& f = first.at(id);
    CHECK(t.traits.dbh.has_value() == f.dbh.has_value());
    if (f.dbh) CHECK(std::abs(*t.traits.dbh - *f.dbh) < 0.02);
    CHECK(std::abs(t.traits.height - f.height) < 0.02);
  }
}

TEST_CASE("marteloscope exports") {
  const auto dir = std::filesystem::temp_directory_path() / "sylva_marteloscope_test";
  std::filesystem::remove_all(dir);
  ForestInventory empty;
  auto files = export_marteloscope(empty, dir / "empty");
  CHECK(read_marteloscope_csv(files.csv).empty());
  CHECK(read_json_file(files.geojson)["features"].empty());

  Rng rng(9);
  ForestInventory inv;
  inv.aggregate({stem_candidate(rng, Vec2(1.23456, 2.5), 0.2), stem_candidate(rng, Vec2(6, -3), 0.15),
                 stem_candidate(rng, Vec2(-5, 4), 0.25)},
                flat_tile(), 0, Pose4(10, 20, 0, 0.2), {Vec3(0, 0, 0.8)}, 0);
  files = export_marteloscope(inv, dir / "three");
  const auto rows = read_marteloscope_csv(files.csv);
  REQUIRE(rows.size() == 3);
  CHECK(read_json_file(files.geojson)["features"].size() == 3);
  std::ifstream svg(files.svg);
  const std::string text((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
  std::size_t circles = 0;
  for (std::size_t pos = text.find("<circle"); pos != std::string::npos; pos = text.find("<circle", pos + 1)) ++circles;
  CHECK(circles == 3);
  std::size_t k = 0;
  for (const auto& [id, t] : inv.trees()) {
    CHECK(rows[k].id == id);
    CHECK(std::abs(rows[k].x - t.position.x()) < 1e-3);
    CHECK(std::abs(rows[k].y - t.position.y()) < 1e-3);
    REQUIRE(rows[k].dbh);
    CHECK(std::abs(*rows[k].dbh - *t.traits.dbh) < 1e-3);
    ++k;
  }
  std::filesystem::remove_all(dir);
}
