#include "sylva/service/config.hpp"

#include <cmath>

namespace sylva::service {

void to_json(Json& j, const SurveyRequest& s) {
  Json poly = Json::array();
  for (const auto& v : s.polygon) poly.push_back({v.x(), v.y()});
  j = {{"polygon", poly},
       {"row_spacing", s.row_spacing},
       {"waypoint_spacing", s.waypoint_spacing},
       {"sweep_heading", s.sweep_heading}};
}

void from_json(const Json& j, SurveyRequest& s) {
  s = SurveyRequest{};
  if (!j.is_object() || !j.contains("polygon") || !j.at("polygon").is_array()) {
    throw ConfigError("survey needs a polygon array");
  }
  for (const auto& v : j.at("polygon")) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError("polygon vertices must be [x, y] pairs");
    }
    s.polygon.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  s.row_spacing = value_or(j, "row_spacing", s.row_spacing);
  s.waypoint_spacing = value_or(j, "waypoint_spacing", s.waypoint_spacing);
  s.sweep_heading = value_or(j, "sweep_heading", s.sweep_heading);
}

std::string to_string(InterventionPolicy p) {
  switch (p) {
    case InterventionPolicy::Off: return "off";
    case InterventionPolicy::Scripted: return "scripted";
    case InterventionPolicy::RescueOnTrapped: return "rescue-on-trapped";
  }
  return "off";
}

InterventionPolicy intervention_policy_from_string(const std::string& s) {
  if (s == "off") return InterventionPolicy::Off;
  if (s == "scripted") return InterventionPolicy::Scripted;
  if (s == "rescue-on-trapped") return InterventionPolicy::RescueOnTrapped;
  throw ConfigError("unknown intervention policy '" + s + "'");
}

void MissionConfig::validate() const {
  world.validate();
  if (world_path && !std::filesystem::exists(*world_path)) {
    throw ConfigError("world spec not found: " + world_path->string());
  }
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(tick_rate, "tick_rate");
  positive(max_time, "max_time");
  positive(node_spacing, "node_spacing");
  positive(replan_period, "replan_period");
  positive(lethal, "lethal");
  positive(state_rate, "state_rate");
  positive(terrain_patch_period, "terrain_patch_period");
  if (optimize_every < 1) throw ConfigError("optimize_every must be at least 1");
  lidar.validate();
  drift.validate();
  cost.validate();
  inventory.validate();
  positive(rescue.wait, "rescue.wait");
  if (rescue.push_distance < 0.0 || rescue.push_distance > robot.max_push) {
    throw ConfigError("rescue.push_distance must lie in [0, robot.max_push]");
  }
  if (!script.is_array()) throw ConfigError("script must be an array of commands");
  if (survey) {
    if (survey->polygon.size() < 3) throw ConfigError("survey polygon needs at least 3 vertices");
    positive(survey->row_spacing, "survey.row_spacing");
    positive(survey->waypoint_spacing, "survey.waypoint_spacing");
  }
}

void to_json(Json& j, const MissionConfig& c) {
  j = Json::object();
  j["name"] = c.name;
  j["world"] = c.world;
  if (c.world_path) j["world_path"] = c.world_path->string();
  if (c.survey) j["survey"] = *c.survey;
  if (c.start_pose) j["start_pose"] = *c.start_pose;
  j["seed"] = c.seed;
  j["tick_rate"] = c.tick_rate;
  j["max_time"] = c.max_time;
  j["node_spacing"] = c.node_spacing;
  j["optimize_every"] = c.optimize_every;
  j["replan_period"] = c.replan_period;
  j["lethal"] = c.lethal;
  j["state_rate"] = c.state_rate;
  j["terrain_patch_period"] = c.terrain_patch_period;
  j["reindex_translation"] = c.reindex_translation;
  j["reindex_yaw"] = c.reindex_yaw;
  j["robot"] = c.robot;
  j["lidar"] = c.lidar;
  j["drift"] = c.drift;
  j["cost"] = c.cost;
  j["traversability"] = c.traversability;
  j["controller"] = c.controller;
  j["progress"] = {{"window", c.progress.window}, {"min_progress", c.progress.min_progress}};
  j["terrain_map"] = c.terrain_map;
  j["loop_closure"] = c.loop_closure;
  j["payload"] = c.payload;
  j["inventory"] = c.inventory;
  j["coverage"] = {{"effective_range", c.coverage.effective_range}, {"resolution", c.coverage.resolution}};
  if (c.coverage.clip) j["coverage"]["clip"] = *c.coverage.clip;
  j["interventions"] = {{"policy", to_string(c.policy)},
                        {"wait", c.rescue.wait},
                        {"push_distance", c.rescue.push_distance},
                        {"no_go_radius", c.rescue.no_go_radius},
                        {"no_go_offset", c.rescue.no_go_offset},
                        {"max_pushes", c.rescue.max_pushes},
                        {"skip_after", c.rescue.skip_after},
                        {"script", c.script}};
  j["output_dir"] = c.output_dir.string();
}

MissionConfig mission_config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("mission config must be a JSON object");
  MissionConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  try {
    c.name = value_or<std::string>(j, "name", c.name);
    if (j.contains("world_path")) {
      c.world_path = resolve(j.at("world_path").get<std::string>());
      if (!std::filesystem::exists(*c.world_path)) {
        throw ConfigError("world spec not found: " + c.world_path->string());
      }
      c.world = read_json_file(*c.world_path).get<sim::WorldSpec>();
    } else if (j.contains("world")) {
      c.world = j.at("world").get<sim::WorldSpec>();
    } else {
      throw ConfigError("mission config needs 'world' or 'world_path'");
    }
    if (j.contains("survey") && !j.at("survey").is_null()) c.survey = j.at("survey").get<SurveyRequest>();
    if (j.contains("start_pose") && !j.at("start_pose").is_null()) c.start_pose = j.at("start_pose").get<Pose4>();
    c.seed = value_or<std::uint64_t>(j, "seed", c.seed);
    c.tick_rate = value_or(j, "tick_rate", c.tick_rate);
    c.max_time = value_or(j, "max_time", c.max_time);
    c.node_spacing = value_or(j, "node_spacing", c.node_spacing);
    c.optimize_every = value_or(j, "optimize_every", c.optimize_every);
    c.replan_period = value_or(j, "replan_period", c.replan_period);
    c.lethal = value_or(j, "lethal", c.lethal);
    c.state_rate = value_or(j, "state_rate", c.state_rate);
    c.terrain_patch_period = value_or(j, "terrain_patch_period", c.terrain_patch_period);
    c.reindex_translation = value_or(j, "reindex_translation", c.reindex_translation);
    c.reindex_yaw = value_or(j, "reindex_yaw", c.reindex_yaw);
    if (j.contains("robot")) c.robot = j.at("robot").get<sim::RobotParams>();
    if (j.contains("lidar")) c.lidar = j.at("lidar").get<sim::LidarSpec>();
    if (j.contains("drift")) c.drift = j.at("drift").get<sim::DriftModel>();
    if (j.contains("cost")) c.cost = j.at("cost").get<autonomy::CostParams>();
    if (j.contains("traversability")) c.traversability = j.at("traversability").get<autonomy::TraversabilityParams>();
    if (j.contains("controller")) c.controller = j.at("controller").get<autonomy::ControllerParams>();
    if (j.contains("progress")) {
      c.progress.window = value_or(j.at("progress"), "window", c.progress.window);
      c.progress.min_progress = value_or(j.at("progress"), "min_progress", c.progress.min_progress);
    }
    if (j.contains("terrain_map")) c.terrain_map = j.at("terrain_map").get<estimation::TerrainMapParams>();
    if (j.contains("loop_closure")) c.loop_closure = j.at("loop_closure").get<estimation::LoopClosureParams>();
    if (j.contains("payload")) c.payload = j.at("payload").get<estimation::PayloadParams>();
    if (j.contains("inventory")) c.inventory = j.at("inventory").get<analysis::InventoryParams>();
    if (j.contains("coverage")) {
      const Json& cj = j.at("coverage");
      c.coverage.effective_range = value_or(cj, "effective_range", c.coverage.effective_range);
      c.coverage.resolution = value_or(cj, "resolution", c.coverage.resolution);
      if (cj.contains("clip") && !cj.at("clip").is_null()) c.coverage.clip = cj.at("clip").get<Rect>();
    }
    if (j.contains("interventions")) {
      const Json& ij = j.at("interventions");
      c.policy = intervention_policy_from_string(value_or<std::string>(ij, "policy", to_string(c.policy)));
      c.rescue.wait = value_or(ij, "wait", c.rescue.wait);
      c.rescue.push_distance = value_or(ij, "push_distance", c.rescue.push_distance);
      c.rescue.no_go_radius = value_or(ij, "no_go_radius", c.rescue.no_go_radius);
      c.rescue.no_go_offset = value_or(ij, "no_go_offset", c.rescue.no_go_offset);
      c.rescue.skip_after = value_or(ij, "skip_after", c.rescue.skip_after);
      c.rescue.max_pushes = value_or(ij, "max_pushes", c.rescue.max_pushes);
      if (ij.contains("script")) c.script = ij.at("script");
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("mission config: ") + e.what());
  }
  c.validate();
  return c;
}

MissionConfig load_mission_config(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  MissionConfig c = mission_config_from_json(j, path.parent_path());
  if (!j.contains("output_dir")) c.output_dir = std::filesystem::path("out") / c.name;
  return c;
}

}  // namespace sylva::service
