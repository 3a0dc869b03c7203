#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sylva/common/ply.hpp"
#include "sylva/sim/lidar.hpp"
#include "sylva/sim/robot.hpp"
#include "sylva/sim/world.hpp"
#include "sylva/sim/world_io.hpp"
#include "test_worlds.hpp"

using namespace sylva;
using namespace sylva::sim;
using sylva::testing::plane_world;
using sylva::testing::upright_tree;

namespace {

WorldSpec plot_spec(int trees, std::uint64_t seed = 7) {
  WorldSpec spec;
  spec.extent = {0.0, 0.0, 125.0, 30.0};
  spec.trees.count = trees;
  spec.seed = seed;
  spec.patches = {{3, {1.0, 2.0}, PatchType::Bush}, {2, {1.0, 1.5}, PatchType::Damp}};
  return spec;
}

/// Signed distance from p to the stem surface at p's height.
double stem_surface_distance(const GroundTruthTree& tree, const Vec3& p) {
  const double h = p.z() - tree.base.z();
  return (p.head<2>() - tree.center_at(h)).norm() - 0.5 * tree.diameter_at(h);
}

}  // namespace

TEST_CASE("generate_world with zero trees keeps the heightfield") {
  const World w = generate_world(plot_spec(0));
  CHECK(w.trees().empty());
  CHECK_FALSE(w.heightfield().empty());
}

TEST_CASE("generate_world places 100 trees at min spacing on a 125x30 plot") {
  const WorldSpec spec = plot_spec(100);
  const World w = generate_world(spec);
  REQUIRE(w.trees().size() == 100);
  for (std::size_t i = 0; i < w.trees().size(); ++i) {
    const auto& a = w.trees()[i];
    CHECK(a.base.z() == doctest::Approx(w.terrain_height(a.base.x(), a.base.y())).epsilon(1e-12));
    CHECK(spec.extent.contains(a.base.head<2>()));
    for (std::size_t k = 1; k < a.knots.size(); ++k) {
      CHECK(a.knots[k].height > a.knots[k - 1].height);
      CHECK(a.knots[k].diameter < a.knots[k - 1].diameter);
    }
    CHECK(a.knots.front().height == 0.0);
    for (std::size_t j = i + 1; j < w.trees().size(); ++j) {
      CHECK((a.base.head<2>() - w.trees()[j].base.head<2>()).norm() >= spec.trees.min_spacing);
    }
  }
  for (const auto& p : w.patches()) {
    CHECK(p.center.x() - p.radius >= spec.extent.min_x);
    CHECK(p.center.x() + p.radius <= spec.extent.max_x);
    CHECK(p.center.y() - p.radius >= spec.extent.min_y);
    CHECK(p.center.y() + p.radius <= spec.extent.max_y);
  }
}

TEST_CASE("generate_world is deterministic per seed") {
  CHECK(generate_world(plot_spec(40, 3)) == generate_world(plot_spec(40, 3)));
  CHECK_FALSE(generate_world(plot_spec(40, 3)) == generate_world(plot_spec(40, 4)));
}

TEST_CASE("overcrowded spec exhausts placement") {
  WorldSpec spec = plot_spec(200);
  spec.extent = {0.0, 0.0, 20.0, 20.0};
  spec.patches.clear();
  try {
    generate_world(spec);
    FAIL("expected PlacementExhausted");
  } catch (const PlacementExhausted& e) {
    CHECK(e.requested() == 200);
    CHECK(e.achieved() < 200);
    CHECK(e.achieved() > 0);
    const World partial = generate_world(spec, true);
    CHECK(static_cast<int>(partial.trees().size()) == e.achieved());
    CHECK(partial.placement_shortfall() == 200 - e.achieved());
  }
}

TEST_CASE("invalid specs are rejected") {
  WorldSpec spec = plot_spec(10);
  spec.trees.min_spacing = 0.5;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = plot_spec(10);
  spec.extent = {0, 0, 0, 10};
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("WorldSpec JSON round trip") {
  const WorldSpec spec = plot_spec(12, 99);
  const Json j = spec;
  const WorldSpec back = j.get<WorldSpec>();
  CHECK(Json(back) == j);
  CHECK(generate_world(back) == generate_world(spec));
}

TEST_CASE("downward ray over flat terrain returns exactly the sensor height") {
  const World w = plane_world({0, 0, 10, 10});
  LidarSpec lidar;
  lidar.channels = 1;
  lidar.vertical_center_deg = -90.0;
  lidar.horizontal_resolution_deg = 360.0;
  lidar.range_noise = 0.0;
  Pose6 pose;
  pose.t = {5.0, 5.0, 1.0};
  Rng rng = make_stream(1, streams::kLidar);
  const PointCloud cloud = scan_lidar(w, pose, lidar, rng);
  REQUIRE(cloud.size() == 1);
  CHECK(cloud.points[0].norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cloud.labels[0].surface == Surface::Terrain);
}

TEST_CASE("ray passing a stem outside its radius misses it") {
  const auto tree = upright_tree(0, 5.0, 0.0, 0.0, 0.30, 0.0);
  const World w = plane_world({-10, -10, 10, 10}, {tree});
  const std::vector<std::size_t> candidates{0};
  const Vec3 origin(0.0, 0.16, 1.0);
  auto hit = cast_ray(w, origin, Vec3::UnitX(), 8.0, candidates);
  CHECK_FALSE(hit.has_value());
  auto direct = cast_ray(w, Vec3(0.0, 0.0, 1.0), Vec3::UnitX(), 8.0, candidates);
  REQUIRE(direct.has_value());
  CHECK(direct->label.surface == Surface::Stem);
  CHECK(direct->range == doctest::Approx(4.85).epsilon(1e-12));
}

TEST_CASE("oblique frustum intersection against an analytic case") {
  // Upright cone frustum r 0.2 -> 0.1 over z 0..1, ray along x at z = 0.5.
  auto t = intersect_frustum(Vec3(-1, 0, 0.5), Vec3::UnitX(), 0.0, 1.0, Vec2::Zero(), Vec2::Zero(), 0.2, 0.1);
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(1.0 - 0.15).epsilon(1e-12));
  // Same frustum sheared by +0.3 in x at the top: the surface shifts by 0.15 at mid height.
  t = intersect_frustum(Vec3(-1, 0, 0.5), Vec3::UnitX(), 0.0, 1.0, Vec2::Zero(), Vec2(0.3, 0.0), 0.2, 0.1);
  REQUIRE(t.has_value());
  CHECK(*t == doctest::Approx(1.0 + 0.15 - 0.15).epsilon(1e-12));
  CHECK_FALSE(intersect_frustum(Vec3(-1, 0, 1.5), Vec3::UnitX(), 0.0, 1.0, Vec2::Zero(), Vec2::Zero(), 0.2, 0.1));
}

TEST_CASE("stem returns of a full scan lie on the frustum surface") {
  auto tree = sim::make_tree(0, Vec3(5.0, 0.0, 0.0), 0.30, 0.008, 15.0, 0.7, 0.05, 1.0, 8.0, 2.0);
  const World w = plane_world({-10, -10, 10, 10}, {tree});
  LidarSpec lidar;
  lidar.range_noise = 0.0;
  lidar.horizontal_resolution_deg = 0.25;
  Pose6 pose;
  pose.t = {0.0, 0.0, 0.8};
  Rng rng = make_stream(1, streams::kLidar);
  const PointCloud cloud = scan_lidar(w, pose, lidar, rng);
  const auto world_cloud = transform_cloud(cloud, pose.isometry());
  int stem = 0;
  for (std::size_t i = 0; i < world_cloud.size(); ++i) {
    const Vec3& p = world_cloud.points[i];
    switch (world_cloud.labels[i].surface) {
      case Surface::Stem:
        ++stem;
        CHECK(std::abs(stem_surface_distance(tree, p)) < 1e-6);
        break;
      case Surface::Terrain:
        CHECK(std::abs(p.z()) < 1e-6);
        break;
      case Surface::Crown:
        CHECK(p.z() == doctest::Approx(tree.crown_base).epsilon(1e-9));
        break;
      default:
        FAIL("unexpected surface");
    }
  }
  CHECK(stem > 50);
}

TEST_CASE("zero-noise returns on generated terrain lie on the surface") {
  WorldSpec spec = plot_spec(15, 21);
  spec.extent = {0, 0, 40, 25};
  spec.terrain.mean_slope = deg2rad(8.0);
  const World w = generate_world(spec);
  LidarSpec lidar;
  lidar.range_noise = 0.0;
  lidar.horizontal_resolution_deg = 2.0;
  Pose6 pose;
  pose.t = {20.0, 12.0, w.terrain_height(20.0, 12.0) + 0.75};
  pose.roll = 0.05;
  pose.pitch = -0.08;
  pose.yaw = 0.4;
  Rng rng = make_stream(2, streams::kLidar);
  const auto world_cloud = transform_cloud(scan_lidar(w, pose, lidar, rng), pose.isometry());
  REQUIRE(world_cloud.size() > 1000);
  for (std::size_t i = 0; i < world_cloud.size(); ++i) {
    const Vec3& p = world_cloud.points[i];
    const auto label = world_cloud.labels[i];
    if (label.surface == Surface::Terrain) {
      CHECK(std::abs(p.z() - w.terrain_height(p.x(), p.y())) < 1e-6);
    } else if (label.surface == Surface::Stem) {
      CHECK(std::abs(stem_surface_distance(w.trees()[label.owner], p)) < 1e-6);
    }
  }
}

TEST_CASE("serial and parallel scans are identical") {
  const World w = generate_world(plot_spec(30, 5));
  LidarSpec lidar;
  Pose6 pose;
  pose.t = {60.0, 15.0, w.terrain_height(60.0, 15.0) + 0.75};
  Rng a = make_stream(9, streams::kLidar);
  Rng b = make_stream(9, streams::kLidar);
  const PointCloud serial = scan_lidar(w, pose, lidar, a, ExecPolicy::Serial);
  const PointCloud parallel = scan_lidar(w, pose, lidar, b, ExecPolicy::Parallel);
  CHECK(serial.points == parallel.points);
  CHECK(serial.size() == parallel.size());
}

TEST_CASE("sensor outside the world is rejected") {
  const World w = plane_world({0, 0, 10, 10}, {}, {}, 0.0, 0.0, 0.25, 1.0);
  Pose6 pose;
  pose.t = {50.0, 5.0, 1.0};
  Rng rng = make_stream(1, streams::kLidar);
  CHECK_THROWS_AS(scan_lidar(w, pose, LidarSpec{}, rng), Error);
}

TEST_CASE("step_robot kinematics") {
  const World w = plane_world({0, 0, 50, 50});
  RobotParams params;
  params.limits.vx_max = 2.0;
  RobotState s = spawn_robot(w, 10.0, 10.0, 0.0, params);

  SUBCASE("zero command only advances the clock") {
    const RobotState n = step_robot(w, s, {}, 0.1, params);
    CHECK(n.pose == s.pose);
    CHECK(n.clock == doctest::Approx(0.1));
  }
  SUBCASE("Euler step along heading") {
    const RobotState n = step_robot(w, s, {1.0, 0.0, 0.0}, 0.1, params);
    CHECK(n.pose.t.x() == doctest::Approx(10.1).epsilon(1e-12));
    CHECK(n.pose.t.y() == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(n.pose.t.z() == doctest::Approx(params.hip_height));
  }
  SUBCASE("commands are clamped to the limits") {
    const RobotState n = step_robot(w, s, {10.0, 10.0, 10.0}, 0.1, params);
    CHECK(params.limits.within(n.command));
  }
  SUBCASE("n small steps match one large step within Euler error") {
    const VelocityCommand cmd{0.5, 0.1, 0.05};
    const double dt = 0.01;
    RobotState fine = s;
    for (int i = 0; i < 100; ++i) fine = step_robot(w, fine, cmd, dt, params);
    const RobotState coarse = step_robot(w, s, cmd, 1.0, params);
    CHECK((fine.pose.t - coarse.pose.t).norm() < 0.5 * cmd.yaw_rate * 1.0 * 0.6);
    CHECK(fine.pose.yaw == doctest::Approx(coarse.pose.yaw).epsilon(1e-9));
  }
}

TEST_CASE("roll and pitch follow the terrain slope") {
  const World w = plane_world({0, 0, 50, 50}, {}, {}, 0.1, 0.0);
  RobotParams params;
  const RobotState s = spawn_robot(w, 20.0, 20.0, 0.0, params);
  CHECK(s.pose.pitch == doctest::Approx(-std::atan(0.1)).epsilon(1e-9));
  CHECK(s.pose.roll == doctest::Approx(0.0));
  CHECK(s.pose.t.z() == doctest::Approx(2.0 + params.hip_height).epsilon(1e-9));
  const RobotState side = spawn_robot(w, 20.0, 20.0, std::numbers::pi / 2, params);
  CHECK(side.pose.roll == doctest::Approx(-std::atan(0.1)).epsilon(1e-9));
  CHECK(side.pose.pitch == doctest::Approx(0.0));
}

TEST_CASE("damp patches trap, bushes slow, interventions free") {
  const World w = plane_world({0, 0, 50, 50}, {}, {{{20.0, 10.0}, 1.5, PatchType::Damp}, {{10.0, 30.0}, 2.0, PatchType::Bush}});
  RobotParams params;
  RobotState s = spawn_robot(w, 15.0, 10.0, 0.0, params);
  const VelocityCommand fwd{0.5, 0.0, 0.0};
  while (!s.trapped && s.clock < 60.0) s = step_robot(w, s, fwd, 0.1, params);
  REQUIRE(s.trapped);
  CHECK(w.in_damp(s.pose.t.head<2>()));
  const Pose6 frozen = s.pose;
  for (int i = 0; i < 50; ++i) s = step_robot(w, s, fwd, 0.1, params);
  CHECK(s.pose == frozen);
  CHECK(s.trapped);

  SUBCASE("push of zero stays trapped inside the patch") {
    const RobotState n = apply_intervention(w, s, Push{0.0, 0.0}, params);
    CHECK(n.pose == s.pose);
    CHECK(n.trapped);
  }
  SUBCASE("push 2 m back out of the patch clears trapped") {
    const RobotState n = apply_intervention(w, s, Push{2.0, std::numbers::pi}, params);
    CHECK_FALSE(n.trapped);
    CHECK_FALSE(w.in_damp(n.pose.t.head<2>()));
    CHECK(n.pose.t.x() == doctest::Approx(frozen.t.x() - 2.0));
  }
  SUBCASE("release clears trapped in place") {
    const RobotState n = apply_intervention(w, s, Release{}, params);
    CHECK_FALSE(n.trapped);
    CHECK(n.pose == s.pose);
  }
  SUBCASE("push beyond the max or out of the world is rejected") {
    CHECK_THROWS_AS(apply_intervention(w, s, Push{params.max_push + 0.1, 0.0}, params), InterventionRejected);
    RobotState edge = spawn_robot(w, w.bounds().max_x - 1.0, 10.0, 0.0, params);
    CHECK_THROWS_AS(apply_intervention(w, edge, Push{2.0, 0.0}, params), InterventionRejected);
  }
  SUBCASE("bush scales speed") {
    RobotState b = spawn_robot(w, 10.0, 30.0, 0.0, params);
    const RobotState n = step_robot(w, b, {0.5, 0.0, 0.0}, 1.0, params);
    CHECK(n.pose.t.x() - 10.0 == doctest::Approx(0.5 * params.bush_speed_factor));
  }
}

TEST_CASE("push of zero outside patches clears trapped") {
  const World w = plane_world({0, 0, 50, 50});
  RobotParams params;
  RobotState s = spawn_robot(w, 5.0, 5.0, 0.0, params);
  s.trapped = true;
  const RobotState n = apply_intervention(w, s, Push{0.0, 0.0}, params);
  CHECK_FALSE(n.trapped);
  CHECK(n.pose == s.pose);
}

TEST_CASE("measure_odometry") {
  Rng rng = make_stream(3, streams::kOdometry);
  const Pose4 delta(1.0, 0.2, 0.0, 0.1);
  SUBCASE("zero drift is exact") {
    CHECK(measure_odometry(delta, DriftModel{0, 0, 0, 0}, rng) == delta);
  }
  SUBCASE("zero-length delta stays identity") {
    CHECK(measure_odometry(Pose4::identity(), DriftModel{}, rng) == Pose4::identity());
  }
  SUBCASE("yaw error variance matches sigma^2 over unit steps") {
    DriftModel d{0.0, 0.01, 0.0, 0.0};
    const Pose4 unit(1.0, 0.0, 0.0, 0.0);
    double sum = 0.0;
    double sum2 = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
      const double e = measure_odometry(unit, d, rng).yaw;
      sum += e;
      sum2 += e * e;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(var == doctest::Approx(1e-4).epsilon(0.2));
  }
  SUBCASE("negative sigma rejected") {
    CHECK_THROWS_AS((DriftModel{-1.0, 0, 0, 0}.validate()), ConfigError);
  }
}

TEST_CASE("world export writes a labelled cloud and tree table") {
  const World w = generate_world(plot_spec(5, 2));
  const auto dir = std::filesystem::temp_directory_path() / "sylva_world_export";
  std::filesystem::remove_all(dir);
  export_world(w, dir, 0.2);
  const PointCloud back = read_ply(dir / "world_cloud.ply");
  REQUIRE(back.has_labels());
  CHECK(std::count_if(back.labels.begin(), back.labels.end(), [](auto l) { return l.surface == Surface::Stem; }) > 0);
  const Json table = read_json_file(dir / "trees.json");
  CHECK(table["trees"].size() == 5);
  CHECK(table["trees"][0]["dbh"].get<double>() == doctest::Approx(w.trees()[0].dbh()));
  std::filesystem::remove_all(dir);
}
