#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sylva/analysis/inventory.hpp"
#include "sylva/autonomy/controller.hpp"
#include "sylva/autonomy/survey.hpp"
#include "sylva/autonomy/traversability.hpp"
#include "sylva/common/json.hpp"
#include "sylva/estimation/payload.hpp"
#include "sylva/estimation/pose_graph.hpp"
#include "sylva/estimation/terrain_map.hpp"
#include "sylva/metrics/metrics.hpp"
#include "sylva/sim/lidar.hpp"
#include "sylva/sim/robot.hpp"
#include "sylva/sim/world.hpp"

namespace sylva::service {

struct SurveyRequest {
  autonomy::Polygon polygon;
  double row_spacing = 10.0;
  double waypoint_spacing = 10.0;
  double sweep_heading = 0.0;
};

void to_json(Json& j, const SurveyRequest& s);
void from_json(const Json& j, SurveyRequest& s);

enum class InterventionPolicy { Off, Scripted, RescueOnTrapped };

std::string to_string(InterventionPolicy p);
InterventionPolicy intervention_policy_from_string(const std::string& s);

struct RescueParams {
  double wait = 15.0;          // s trapped before the push
  double push_distance = 2.0;  // m
  double no_go_radius = 2.5;   // m, remembered around a spot the robot was freed from
  double no_go_offset = 1.0;   // m, disc center ahead of the trapped spot, away from the push
  int max_pushes = 4;
  int skip_after = 2;  // rescues on one goal before resuming from the next goal
};

struct MissionConfig {
  std::string name = "mission";
  sim::WorldSpec world;
  std::optional<std::filesystem::path> world_path;
  std::optional<SurveyRequest> survey;
  std::optional<Pose4> start_pose;  // defaults to the first waypoint
  std::uint64_t seed = 1;
  double tick_rate = 10.0;  // Hz
  double max_time = 3600.0;  // s of simulated mission time
  double node_spacing = 2.0;
  int optimize_every = 10;
  double replan_period = 1.0;  // s
  double lethal = 1.0;
  double state_rate = 5.0;         // Hz
  double terrain_patch_period = 5.0;  // s
  double reindex_translation = 0.01;  // m
  double reindex_yaw = 0.002;         // rad

  sim::RobotParams robot;
  sim::LidarSpec lidar;
  sim::DriftModel drift;
  autonomy::CostParams cost;
  autonomy::TraversabilityParams traversability;
  autonomy::ControllerParams controller;
  autonomy::ProgressParams progress;
  estimation::TerrainMapParams terrain_map;
  estimation::LoopClosureParams loop_closure;
  estimation::PayloadParams payload;
  analysis::InventoryParams inventory;
  metrics::CoverageParams coverage;

  InterventionPolicy policy = InterventionPolicy::RescueOnTrapped;
  RescueParams rescue;
  Json script = Json::array();  // wire commands with "at" times

  std::filesystem::path output_dir = "out";

  /// Throws ConfigError.
  void validate() const;
};

void to_json(Json& j, const MissionConfig& c);
/// World spec comes from "world" (inline object) or "world_path"; relative
/// paths resolve against `base_dir`.
MissionConfig mission_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
MissionConfig load_mission_config(const std::filesystem::path& path);

}  // namespace sylva::service
