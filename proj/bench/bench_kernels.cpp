#include <benchmark/benchmark.h>

#include "sylva/analysis/cloth.hpp"
#include "sylva/autonomy/traversability.hpp"
#include "sylva/common/random.hpp"
#include "sylva/estimation/terrain_map.hpp"
#include "sylva/metrics/metrics.hpp"
#include "sylva/sim/lidar.hpp"
#include "sylva/sim/world.hpp"
#include "sylva/sim/world_io.hpp"

using namespace sylva;

namespace {

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecPolicy::Serial : ExecPolicy::Parallel;
}

const sim::World& bench_world() {
  static const sim::World world = [] {
    sim::WorldSpec spec;
    spec.extent = {0.0, 0.0, 40.0, 40.0};
    spec.trees.count = 40;
    spec.seed = 3;
    return sim::generate_world(spec);
  }();
  return world;
}

Pose6 sensor_pose() {
  Pose6 p;
  p.t = Vec3(20.0, 20.0, bench_world().terrain_height(20.0, 20.0) + 0.6);
  return p;
}

void BM_ScanLidar(benchmark::State& state) {
  const auto& world = bench_world();
  const sim::LidarSpec lidar;
  for (auto _ : state) {
    Rng noise = make_stream(1, streams::kLidar);
    benchmark::DoNotOptimize(sim::scan_lidar(world, sensor_pose(), lidar, noise, policy_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(lidar.ray_count()));
}

void BM_Cloth(benchmark::State& state) {
  static const PointCloud cloud = sim::sample_world(bench_world(), 0.15);
  for (auto _ : state) benchmark::DoNotOptimize(analysis::fit_terrain_cloth(cloud, {}, policy_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cloud.size()));
}

void BM_Traversability(benchmark::State& state) {
  static const estimation::TerrainMap map = [] {
    estimation::TerrainMap m({}, Vec2(20.0, 20.0));
    Rng noise = make_stream(1, streams::kLidar);
    const auto pose = sensor_pose();
    update_terrain_map(m, sim::scan_lidar(bench_world(), pose, {}, noise), pose.isometry());
    return m;
  }();
  const autonomy::TraversabilityParams params;
  for (auto _ : state) benchmark::DoNotOptimize(autonomy::score_traversability(map, params, policy_of(state)));
}

void BM_Coverage(benchmark::State& state) {
  std::vector<Vec2> samples;
  for (int row = 0; row < 8; ++row) {
    for (int k = 0; k <= 400; ++k) samples.emplace_back(k * 0.1, row * 5.0);
  }
  metrics::CoverageParams params;
  for (auto _ : state) benchmark::DoNotOptimize(metrics::compute_covered_area(samples, params, policy_of(state)));
}

}  // namespace

BENCHMARK(BM_ScanLidar)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Cloth)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Traversability)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Coverage)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
