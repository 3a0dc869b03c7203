#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "scenarios.hpp"
#include "sylva/estimation/payload.hpp"
#include "sylva/estimation/pose_graph.hpp"
#include "sylva/estimation/terrain_map.hpp"
#include "sylva/sim/lidar.hpp"
#include "test_worlds.hpp"

using namespace sylva;
using namespace sylva::estimation;

TEST_CASE("integrate_odometry composition") {
  const Pose4 start(1.0, 2.0, 0.0, 0.0);
  CHECK(integrate_odometry(start, Pose4::identity()) == start);
  const Pose4 two = integrate_odometry(integrate_odometry({}, {1, 0, 0, 0}), {1, 0, 0, 0});
  CHECK(two.t.isApprox(Vec3(2, 0, 0)));
  const Pose4 turned = integrate_odometry(integrate_odometry({}, {0, 0, 0, std::numbers::pi / 2}), {1, 0, 0, 0});
  CHECK((turned.t - Vec3(0, 1, 0)).norm() < 1e-12);
}

TEST_CASE("add_node builds an odometry chain") {
  PoseGraph g;
  CHECK(g.add_node({}, {}, {}) == 0);
  CHECK(g.edges().empty());
  CHECK(g.add_node({2, 0, 0, 0}, {2, 0, 0, 0}, {}) == 1);
  REQUIRE(g.edges().size() == 1);
  CHECK(g.edges()[0].measurement.t.x() == 2.0);
  CHECK(g.edges()[0].kind == EdgeKind::Odometry);
  CHECK_THROWS_AS(g.add_node({std::nan(""), 0, 0, 0}, {}, {}), InvalidPose);
  CHECK(g.size() == 2);

  Rng rng = make_stream(4, 0);
  PoseGraph walk;
  walk.add_node({}, {}, {});
  const int n = 57;
  for (int i = 1; i < n; ++i) {
    const Pose4 d(draw_uniform(rng, 0, 2), draw_uniform(rng, -1, 1), 0.0, draw_uniform(rng, -0.5, 0.5));
    walk.add_node(walk.back().pose * d, d, {});
  }
  CHECK(walk.edges().size() == static_cast<std::size_t>(n - 1));
  for (std::size_t i = 0; i < walk.edges().size(); ++i) {
    CHECK(walk.edges()[i].from == static_cast<int>(i));
    CHECK(walk.edges()[i].to == static_cast<int>(i + 1));
  }
}

TEST_CASE("odometry-only graph is already optimal") {
  PoseGraph g;
  g.add_node({}, {}, {});
  Rng rng = make_stream(8, 0);
  for (int i = 0; i < 20; ++i) {
    const Pose4 d(2.0, 0.1, 0.01, draw_uniform(rng, -0.3, 0.3));
    g.add_node(g.back().pose * d, d, {});
  }
  const auto before = g.poses();
  const auto r = optimize_graph(g);
  CHECK(r.initial_cost < 1e-20);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK((g.poses()[i].t - before[i].t).norm() < 1e-12);
  }
}

namespace {

/// Square of side 10 m walked with 1.25 deg of yaw error per corner.
PoseGraph drifting_square() {
  PoseGraph g;
  g.add_node({}, {}, {});
  const double err = deg2rad(5.0) / 4.0;
  for (int i = 0; i < 4; ++i) {
    const Pose4 d(10.0, 0.0, 0.0, std::numbers::pi / 2 + err);
    g.add_node(g.back().pose * d, d, {1.0, 1.0, 1.0});
  }
  return g;
}

}  // namespace

TEST_CASE("square loop with an exact closure removes the endpoint error") {
  PoseGraph g = drifting_square();
  const Pose4 truth_end(0.0, 0.0, 0.0, 0.0);
  const double before = (g.back().pose.t - truth_end.t).norm();
  REQUIRE(before > 0.5);
  g.add_edge({0, 4, EdgeKind::Loop, Pose4::identity(), {1e6, 1e6, 1e6}});
  const auto r = optimize_graph(g);
  CHECK(r.final_cost <= r.initial_cost);
  CHECK(r.converged);
  const double after = (g.back().pose.t - truth_end.t).norm();
  CHECK(after < 0.01 * before);
}

TEST_CASE("duplicating an edge leaves the optimum unchanged") {
  PoseGraph a = drifting_square();
  a.add_edge({0, 4, EdgeKind::Loop, Pose4::identity(), {10.0, 10.0, 10.0}});
  PoseGraph b = a;
  b.add_edge(b.edges()[2]);
  b.add_edge(b.edges()[4]);
  PoseGraph c = a;
  for (std::size_t i = 0, n = c.edges().size(); i < n; ++i) c.add_edge(c.edges()[i]);
  optimize_graph(a);
  optimize_graph(c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a.poses()[i].t - c.poses()[i].t).norm() < 1e-8);
  }
  const auto r = optimize_graph(b);
  CHECK(r.final_cost <= r.initial_cost);
}

TEST_CASE("optimization is gauge invariant under planar rigid motion") {
  PoseGraph a = drifting_square();
  a.add_edge({0, 4, EdgeKind::Loop, Pose4(0.3, -0.2, 0.0, 0.05), {5.0, 5.0, 50.0}});
  PoseGraph b = a;
  const Pose4 motion(13.0, -4.0, 0.0, 0.9);
  auto moved = b.poses();
  for (auto& p : moved) p = motion * p;
  b.set_poses(moved);
  optimize_graph(a);
  optimize_graph(b);
  for (std::size_t i = 1; i < a.size(); ++i) {
    const Pose4 ra = a.poses()[i - 1].between(a.poses()[i]);
    const Pose4 rb = b.poses()[i - 1].between(b.poses()[i]);
    CHECK((ra.t - rb.t).norm() < 1e-8);
    CHECK(std::abs(wrap_angle(ra.yaw - rb.yaw)) < 1e-9);
  }
}

TEST_CASE("optimizer never increases the weighted residual") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = make_stream(seed, 11);
    PoseGraph g;
    g.add_node({}, {}, {});
    for (int i = 0; i < 30; ++i) {
      const Pose4 d(draw_uniform(rng, 0.5, 2.0), draw_uniform(rng, -0.5, 0.5), 0.0, draw_uniform(rng, -1.0, 1.0));
      g.add_node(g.back().pose * d, d, {draw_uniform(rng, 0.5, 5.0), 1.0, draw_uniform(rng, 1.0, 100.0)});
    }
    for (int k = 0; k < 8; ++k) {
      const int i = static_cast<int>(draw_uniform(rng, 0, 29.99));
      const int j = static_cast<int>(draw_uniform(rng, 0, 29.99));
      if (i == j) continue;
      // Deliberately inconsistent measurements.
      g.add_edge({i, j, EdgeKind::Loop, Pose4(draw_uniform(rng, -5, 5), draw_uniform(rng, -5, 5), 0.0,
                                              draw_uniform(rng, -3, 3)),
                  {10.0, 1.0, 10.0}});
    }
    const double before = graph_cost(g);
    const auto r = optimize_graph(g);
    CHECK(r.initial_cost == doctest::Approx(before));
    CHECK(r.final_cost <= r.initial_cost);
    CHECK(graph_cost(g) == doctest::Approx(r.final_cost));
  }
}

TEST_CASE("loop closure detection") {
  LoopClosureParams lc;
  Rng rng = make_stream(1, streams::kRegistration);

  SUBCASE("straight line never closes a loop") {
    PoseGraph g;
    std::vector<Pose4> truth;
    for (int i = 0; i < 60; ++i) {
      truth.emplace_back(2.0 * i, 0.0, 0.0, 0.0);
      g.add_node(truth.back(), {2, 0, 0, 0}, {});
      CHECK(detect_loop_closures(g, i, truth, lc, rng).empty());
    }
  }
  SUBCASE("adjacent lawnmower rows 10 m apart close loops") {
    const auto truth = sylva::testing::lawnmower_poses(3, 60.0, 10.0, 2.0);
    PoseGraph g;
    g.add_node(truth[0], {}, {});
    std::vector<int> row_of;
    for (std::size_t i = 1; i < truth.size(); ++i) {
      g.add_node(truth[i], truth[i - 1].between(truth[i]), {});
      detect_loop_closures(g, static_cast<int>(i), truth, lc, rng);
    }
    // Every loop edge joins poses of different rows; rows 1 and 2 each get closures.
    int row1 = 0;
    int row2 = 0;
    for (const auto& e : g.edges()) {
      if (e.kind != EdgeKind::Loop) continue;
      const double d = (truth[e.from].t - truth[e.to].t).norm();
      CHECK(d >= lc.radius_min - 1e-9);
      CHECK(d <= lc.radius_max + 1e-9);
      const double y = truth[e.to].t.y();
      if (std::abs(y - 10.0) < 1e-9) ++row1;
      if (std::abs(y - 20.0) < 1e-9) ++row2;
    }
    CHECK(row1 >= 1);
    CHECK(row2 >= 1);
  }
  SUBCASE("drifted candidate beyond the effective range fails verification") {
    PoseGraph g;
    std::vector<Pose4> truth;
    for (int i = 0; i < 12; ++i) {
      truth.emplace_back(2.0 * i, 0.0, 0.0, 0.0);
      g.add_node(truth.back(), {2, 0, 0, 0}, {});
    }
    // The estimate believes it is 12 m from node 0; in truth it is 30 m away.
    truth.emplace_back(30.0, 0.0, 0.0, 0.0);
    g.add_node({12.0, 0.0, 0.0, 0.0}, {2, 0, 0, 0}, {});
    CHECK(detect_loop_closures(g, 12, truth, lc, rng).empty());
    truth.back() = Pose4(12.0, 0.0, 0.0, 0.0);
    const auto edges = detect_loop_closures(g, 12, truth, lc, rng);
    // Nodes 0 and 1 are outside the recent window and 12 m / 10 m away; nearest first.
    REQUIRE(edges.size() == 2);
    CHECK(edges[0].from == 1);
    CHECK(edges[1].from == 0);
    CHECK(std::abs(edges[1].measurement.t.x() - 12.0) <= 3.0 * lc.sigma_xy + 1e-12);
  }
}

TEST_CASE("loop closures beat dead reckoning on drifting lawnmowers") {
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = sylva::testing::lawnmower_loop_benefit(seed, sim::DriftModel{});
    CHECK(r.residual_monotone);
    CHECK(r.loop_edges > 0);
    if (r.error_with < r.error_without) ++wins;
  }
  CHECK(wins >= 19);
}

TEST_CASE("g2o export lists every vertex and edge") {
  PoseGraph g = drifting_square();
  g.add_edge({0, 4, EdgeKind::Loop, Pose4::identity(), {1, 1, 1}});
  const std::string text = to_g2o(g);
  int vertices = 0;
  int edges = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VERTEX_SE3:QUAT", 0) == 0) ++vertices;
    if (line.rfind("EDGE_SE3:QUAT", 0) == 0) {
      ++edges;
      std::istringstream fields(line);
      std::string tag;
      int count = 0;
      while (fields >> tag) ++count;
      CHECK(count == 1 + 2 + 7 + 21);
    }
  }
  CHECK(vertices == 5);
  CHECK(edges == 5);
}

namespace {

TaggedScan flat_scan(const sim::World& world, const Pose4& pose, std::uint64_t seed, double noise = 0.0) {
  sim::LidarSpec lidar;
  lidar.range_noise = noise;
  lidar.horizontal_resolution_deg = 2.0;
  Pose6 sensor;
  sensor.t = pose.t;
  sensor.yaw = pose.yaw;
  Rng rng = make_stream(seed, streams::kLidar);
  return {sim::scan_lidar(world, sensor, lidar, rng), pose};
}

}  // namespace

TEST_CASE("payload accumulation") {
  const sim::World world = sylva::testing::plane_world({0, 0, 60, 20});
  PayloadParams params;
  std::vector<TaggedScan> scans;
  for (int i = 0; i <= 19; ++i) scans.push_back(flat_scan(world, Pose4(5.0 + i, 10.0, 0.8, 0.0), i));
  CHECK_FALSE(accumulate_payload(scans, scans.back().pose, 19.0, params).has_value());
  scans.push_back(flat_scan(world, Pose4(25.0, 10.0, 0.8, 0.0), 99));
  const auto payload = accumulate_payload(scans, Pose4(25.0, 10.0, 0.8, 0.0), 20.0, params);
  REQUIRE(payload.has_value());
  CHECK(payload->viewpoints.size() == scans.size());
  // Terrain in the anchor frame sits 0.8 m below it: plane fit residual within the voxel size.
  double sum2 = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < payload->cloud.size(); ++i) {
    const Vec3& p = payload->cloud.points[i];
    CHECK(p.head<2>().norm() <= 15.0 + 20.0 + 1e-9);
    sum2 += (p.z() + 0.8) * (p.z() + 0.8);
    ++n;
  }
  REQUIRE(n > 1000);
  CHECK(std::sqrt(sum2 / n) < params.voxel_leaf);
}

TEST_CASE("payload accumulator cadence and anchors") {
  const sim::World world = sylva::testing::plane_world({0, 0, 120, 20});
  PayloadAccumulator acc;
  std::vector<DataPayload> out;
  double travelled = 0.0;
  int node = 0;
  double since_node = 0.0;
  for (int i = 0; i < 90; ++i) {
    const Pose4 pose(5.0 + i, 10.0, 0.8, 0.0);
    acc.add_scan(flat_scan(world, pose, i), i == 0 ? 0.0 : 1.0);
    travelled += 1.0;
    since_node += 1.0;
    if (since_node >= 2.0) {
      ++node;
      since_node = 0.0;
    }
    if (auto p = acc.emit(node, pose, pose, i)) out.push_back(std::move(*p));
  }
  REQUIRE(out.size() == 4);
  for (std::size_t k = 0; k < out.size(); ++k) {
    CHECK(out[k].id == static_cast<int>(k));
    CHECK(std::abs(out[k].distance - 20.0) <= 2.0);
    if (k > 0) CHECK(out[k].anchor_node != out[k - 1].anchor_node);
  }
}

TEST_CASE("payload PLY and sidecar round trip") {
  const sim::World world = sylva::testing::plane_world({0, 0, 30, 20});
  const auto payload =
      accumulate_payload({flat_scan(world, Pose4(5, 10, 0.8, 0.3), 1)}, Pose4(5, 10, 0.8, 0.3), 25.0, {});
  REQUIRE(payload);
  DataPayload p = *payload;
  p.id = 7;
  p.anchor_node = 12;
  p.anchor_pose = Pose4(1, 2, 3, 0.4);
  const auto dir = std::filesystem::temp_directory_path() / "sylva_payload_rt";
  std::filesystem::remove_all(dir);
  write_payload(dir, p);
  const DataPayload back = read_payload(dir / "payload_7.json");
  CHECK(back.anchor_node == 12);
  CHECK(back.anchor_pose == p.anchor_pose);
  CHECK(back.cloud == p.cloud);
  CHECK(back.viewpoints == p.viewpoints);
  std::filesystem::remove_all(dir);
}

TEST_CASE("terrain map on flat ground") {
  const sim::World world = sylva::testing::plane_world({0, 0, 40, 40}, {}, {}, 0.0, 0.0, 0.25, 10.0);
  TerrainMap map({}, Vec2(20, 20));
  const auto scan = flat_scan(world, Pose4(20, 20, 0.8, 0.0), 3, 0.01);
  Pose6 sensor;
  sensor.t = {20, 20, 0.8};
  update_terrain_map(map, scan.cloud, sensor.isometry());
  REQUIRE(map.known_count() > 500);
  const auto& g = map.grid();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g[i].known) continue;
    CHECK(std::abs(g[i].elevation) < 0.05);
    CHECK(g[i].obstacle < 0.05);
  }
  CHECK(map.known_count() < g.size());
}

TEST_CASE("terrain map keeps ground under a trunk and flags the trunk as an obstacle") {
  const auto tree = sylva::testing::upright_tree(0, 24.0, 20.0, 0.0, 0.4);
  const sim::World world = sylva::testing::plane_world({0, 0, 40, 40}, {tree}, {}, 0.0, 0.0, 0.25, 10.0);
  TerrainMap map({}, Vec2(20, 20));
  Pose6 sensor;
  sensor.t = {20, 20, 0.8};
  sim::LidarSpec lidar;
  lidar.range_noise = 0.0;
  lidar.horizontal_resolution_deg = 0.5;
  Rng rng = make_stream(5, streams::kLidar);
  update_terrain_map(map, sim::scan_lidar(world, sensor, lidar, rng), sensor.isometry());
  const auto& g = map.grid();
  // Trunk surface facing the sensor is at x = 23.8.
  const auto cell = g.find_cell(Vec2(23.81, 20.0));
  REQUIRE(cell);
  REQUIRE(g.at(*cell).known);
  CHECK(std::abs(g.at(*cell).elevation) < 0.1);
  CHECK(g.at(*cell).obstacle > 0.5);
}

TEST_CASE("terrain map recentering keeps overlapping cells") {
  TerrainMap map({}, Vec2(0, 0));
  auto& g = map.grid();
  const auto c = g.find_cell(Vec2(1.05, 2.05));
  REQUIRE(c);
  g.at(*c) = {0.7, 0.0, true};
  map.recenter(Vec2(5.0, -3.0));
  const auto moved = map.grid().find_cell(Vec2(1.05, 2.05));
  REQUIRE(moved);
  CHECK(map.grid().at(*moved) == TerrainCell{0.7, 0.0, true});
  CHECK(map.known_count() == 1);
  map.recenter(Vec2(100.0, 0.0));
  CHECK(map.known_count() == 0);
}
