#pragma once

#include <deque>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sylva/analysis/inventory.hpp"
#include "sylva/autonomy/controller.hpp"
#include "sylva/autonomy/gdf.hpp"
#include "sylva/autonomy/mission.hpp"
#include "sylva/autonomy/survey.hpp"
#include "sylva/autonomy/traversability.hpp"
#include "sylva/common/parallel.hpp"
#include "sylva/estimation/payload.hpp"
#include "sylva/estimation/pose_graph.hpp"
#include "sylva/estimation/terrain_map.hpp"
#include "sylva/metrics/metrics.hpp"
#include "sylva/service/config.hpp"
#include "sylva/service/wire.hpp"
#include "sylva/sim/robot.hpp"
#include "sylva/sim/world.hpp"

namespace sylva::service {

struct RunnerOptions {
  ExecPolicy policy = ExecPolicy::Parallel;
  bool write_artifacts = true;
};

/// Statistics that are not part of the report but are useful to tests.
struct RunnerStats {
  int scans = 0;
  int payloads = 0;
  int optimizations = 0;
  bool optimizer_monotone = true;
  int reindexes = 0;
  int replans = 0;
  int skipped_goals = 0;
  int rescues = 0;  // pushes that freed a trapped robot
  int commands_acked = 0;
  int commands_rejected = 0;
};

/// Owns one mission: world, robot, estimation, autonomy and analysis, all
/// advanced in simulated time by tick(). Commands from any source go
/// through the same queue; every outgoing message is passed to the sink
/// and appended to events.jsonl.
class MissionRunner {
 public:
  using Sink = std::function<void(const Json&)>;

  explicit MissionRunner(MissionConfig config, RunnerOptions options = {});
  ~MissionRunner();
  MissionRunner(const MissionRunner&) = delete;
  MissionRunner& operator=(const MissionRunner&) = delete;

  void set_sink(Sink sink) { sink_ = std::move(sink); }

  /// Thread-safe.
  void submit(Command command);
  /// Thread-safe. Queues an event (data object with a "kind") that is emitted
  /// at the next tick in arrival order with commands, e.g. the rejection of a
  /// malformed wire message.
  void submit_notice(Json event);
  /// Queues the config survey (define_survey + start at t = 0) and the
  /// configured script.
  void load_config_commands();

  /// Advances one control tick. Before start the clock holds at zero.
  /// Returns false once the mission has ended; later calls only reject
  /// queued commands.
  bool tick();
  bool ended() const { return ended_; }
  /// Wraps up an ended (or still running, which is then aborted) mission:
  /// flushes the last payload, optimizes, writes artifacts.
  metrics::MissionReport finish();
  /// load_config_commands, tick until the end, finish.
  metrics::MissionReport run();

  double time() const;
  double dt() const { return 1.0 / config_.tick_rate; }
  const MissionConfig& config() const { return config_; }
  const sim::World& world() const { return world_; }
  const sim::RobotState& robot() const { return robot_; }
  const Pose4& odometry() const { return odom_; }
  Pose4 estimated_pose() const;
  const estimation::PoseGraph& graph() const { return graph_; }
  const std::vector<Pose4>& true_node_poses() const { return node_truth_; }
  const analysis::ForestInventory& inventory() const { return inventory_; }
  const std::optional<autonomy::SurveyPlan>& plan() const { return plan_; }
  const autonomy::MissionState& mission() const { return mission_; }
  autonomy::Phase phase() const { return mission_.phase; }
  const std::vector<metrics::InterventionRecord>& interventions() const { return records_; }
  bool intervention_open() const { return open_record_.has_value(); }
  const std::vector<metrics::TrajectorySample>& trajectory() const { return trajectory_; }
  const sim::VelocityCommand& last_command() const { return robot_.command; }
  const RunnerStats& stats() const { return stats_; }
  const estimation::TerrainMap& terrain_map() const { return terrain_; }
  const std::optional<autonomy::TraversabilityLayer>& traversability() const { return layer_; }
  const std::optional<autonomy::GeodesicField>& field() const { return field_; }
  Pose4 odom_from_map() const;
  std::int64_t last_seq() const { return seq_; }

 private:
  void drain_commands();
  void apply(const Command& c);
  std::optional<std::string> apply_define_survey(const Command& c);
  std::optional<std::string> apply_start();
  std::optional<std::string> apply_interrupt();
  std::optional<std::string> apply_push(const Command& c);
  std::optional<std::string> apply_resume(const Command& c);
  std::optional<std::string> apply_set_params(const Command& c);
  std::optional<std::string> step_mission(const autonomy::MissionEvent& e);
  void handle_action(const autonomy::MissionAction& action);

  void sense();
  void maybe_add_node(bool force = false);
  void optimize_and_reindex();
  void handle_payload(estimation::DataPayload payload);
  sim::VelocityCommand control(double t);
  void replan(const Vec2& goal_odom);
  void rescue_policy(double t);
  void integrate_odometry(const sim::RobotState& before);
  void end_mission(bool completed);

  void emit(const std::string& type, Json data);
  void emit_state();
  void emit_metrics();
  void emit_terrain_patch();
  void emit_graph(bool full);
  void emit_trees();
  Json event(const std::string& kind) const;

  MissionConfig config_;
  RunnerOptions options_;
  sim::World world_;
  sim::RobotState robot_;
  Rng lidar_rng_;
  Rng odometry_rng_;
  Rng registration_rng_;

  std::int64_t ticks_ = 0;
  std::int64_t idle_calls_ = 0;
  bool started_ = false;
  bool ended_ = false;
  bool completed_ = false;
  bool finished_ = false;
  double start_time_ = 0.0;
  double end_time_ = 0.0;
  double distance_ = 0.0;

  std::optional<autonomy::SurveyPlan> plan_;
  autonomy::MissionState mission_;

  Pose4 odom_;
  estimation::PoseGraph graph_;
  std::vector<Pose4> node_odom_;
  std::vector<Pose4> node_truth_;
  double node_travel_ = 0.0;
  double scan_travel_ = 0.0;
  estimation::PayloadAccumulator accumulator_;
  estimation::TerrainMap terrain_;
  analysis::ForestInventory inventory_;
  std::vector<int> payload_ids_;

  std::optional<autonomy::GeodesicField> field_;
  std::optional<autonomy::TraversabilityLayer> layer_;
  int field_goal_ = -1;
  bool goal_blocked_ = false;
  bool map_dirty_ = true;
  double last_plan_ = -1e300;
  std::deque<autonomy::ProgressSample> progress_;
  std::vector<std::pair<Vec2, double>> no_go_;  // odometry frame

  std::optional<metrics::InterventionRecord> open_record_;
  std::vector<metrics::InterventionRecord> records_;
  double trapped_since_ = -1.0;
  int rescue_pushes_ = 0;
  std::pair<int, int> goal_rescues_{-1, 0};  // goal, rescues while pursuing it
  Vec2 last_free_ = Vec2::Zero();
  std::vector<metrics::TrajectorySample> trajectory_;

  std::mutex inbox_mutex_;
  using Inbound = std::variant<Command, Json>;
  std::vector<Inbound> inbox_;
  std::vector<std::pair<std::int64_t, Inbound>> pending_;  // arrival order, item
  std::int64_t arrival_ = 0;

  Sink sink_;
  std::int64_t seq_ = 0;
  std::ofstream events_;
  RunnerStats stats_;
};

}  // namespace sylva::service
