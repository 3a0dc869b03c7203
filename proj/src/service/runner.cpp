#include "sylva/service/runner.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sylva/analysis/marteloscope.hpp"
#include "sylva/common/log.hpp"
#include "sylva/service/evaluation.hpp"

namespace sylva::service {

namespace {

Json pose_json(const Pose4& p) { return p; }

Json velocity_json(const sim::VelocityCommand& c) {
  return {{"vx", c.vx}, {"vy", c.vy}, {"yaw_rate", c.yaw_rate}};
}

std::int64_t every(double period_s, double tick_rate) {
  return std::max<std::int64_t>(1, std::llround(period_s * tick_rate));
}

}  // namespace

MissionRunner::MissionRunner(MissionConfig config, RunnerOptions options)
    : config_(std::move(config)),
      options_(options),
      world_(sim::generate_world(config_.world)),
      lidar_rng_(make_stream(config_.seed, streams::kLidar)),
      odometry_rng_(make_stream(config_.seed, streams::kOdometry)),
      registration_rng_(make_stream(config_.seed, streams::kRegistration)),
      accumulator_(config_.payload),
      terrain_(config_.terrain_map),
      inventory_(config_.inventory) {
  config_.validate();
  const Rect e = config_.world.extent;
  const Vec2 c((e.min_x + e.max_x) / 2.0, (e.min_y + e.max_y) / 2.0);
  robot_ = sim::spawn_robot(world_, c.x(), c.y(), 0.0, config_.robot);
  odom_ = robot_.pose.gravity_aligned();
  last_free_ = c;
  if (options_.write_artifacts) {
    std::filesystem::create_directories(config_.output_dir);
    events_.open(config_.output_dir / "events.jsonl", std::ios::binary | std::ios::trunc);
    if (!events_) throw IoError("cannot write " + (config_.output_dir / "events.jsonl").string());
  }
}

MissionRunner::~MissionRunner() = default;

double MissionRunner::time() const { return static_cast<double>(ticks_) / config_.tick_rate; }

void MissionRunner::submit(Command command) {
  std::lock_guard<std::mutex> lock(inbox_mutex_);
  inbox_.push_back(std::move(command));
}

void MissionRunner::load_config_commands() {
  if (config_.survey) {
    Command define;
    define.type = CommandType::DefineSurvey;
    define.source = "config";
    define.survey = config_.survey;
    define.at = 0.0;
    submit(define);
    Command start;
    start.type = CommandType::Start;
    start.source = "config";
    start.at = 0.0;
    submit(start);
  }
  for (const Json& j : config_.script) {
    Command c = command_from_json(j);
    if (!j.contains("source")) c.source = "script";
    submit(std::move(c));
  }
}

Pose4 MissionRunner::odom_from_map() const {
  if (graph_.empty()) return Pose4::identity();
  return node_odom_.back() * graph_.back().pose.inverse();
}

Pose4 MissionRunner::estimated_pose() const {
  if (graph_.empty()) return odom_;
  return graph_.back().pose * node_odom_.back().between(odom_);
}

// Commands

void MissionRunner::submit_notice(Json event) {
  std::lock_guard<std::mutex> lock(inbox_mutex_);
  inbox_.emplace_back(std::move(event));
}

void MissionRunner::drain_commands() {
  {
    std::lock_guard<std::mutex> lock(inbox_mutex_);
    for (auto& c : inbox_) pending_.emplace_back(arrival_++, std::move(c));
    inbox_.clear();
  }
  const double t = time();
  auto due_at = [&](const Inbound& item) {
    const auto* c = std::get_if<Command>(&item);
    return c && c->at ? *c->at : t;
  };
  std::vector<std::pair<std::int64_t, Inbound>> due;
  std::vector<std::pair<std::int64_t, Inbound>> later;
  for (auto& entry : pending_) {
    if (ended_ || due_at(entry.second) <= t + 1e-9) {
      due.push_back(std::move(entry));
    } else {
      later.push_back(std::move(entry));
    }
  }
  pending_ = std::move(later);
  std::stable_sort(due.begin(), due.end(), [&](const auto& a, const auto& b) {
    const double ta = due_at(a.second);
    const double tb = due_at(b.second);
    if (ta != tb) return ta < tb;
    return a.first < b.first;
  });
  for (auto& entry : due) {
    if (auto* c = std::get_if<Command>(&entry.second)) {
      apply(*c);
    } else {
      Json& ev = std::get<Json>(entry.second);
      if (ev.value("kind", "") == "reject") ++stats_.commands_rejected;
      emit("event", std::move(ev));
    }
  }
}

void MissionRunner::apply(const Command& c) {
  std::optional<std::string> reason;
  if (ended_) {
    reason = "mission has ended";
  } else {
    switch (c.type) {
      case CommandType::DefineSurvey: reason = apply_define_survey(c); break;
      case CommandType::Start: reason = apply_start(); break;
      case CommandType::Interrupt: reason = apply_interrupt(); break;
      case CommandType::Push: reason = apply_push(c); break;
      case CommandType::Resume: reason = apply_resume(c); break;
      case CommandType::SetParams: reason = apply_set_params(c); break;
    }
  }
  Json ev = event(reason ? "reject" : "ack");
  ev["command"] = to_string(c.type);
  ev["source"] = c.source;
  if (c.seq) ev["command_seq"] = *c.seq;
  if (reason) {
    ev["reason"] = *reason;
    ++stats_.commands_rejected;
    log().info("t={:.1f} rejected {} from {}: {}", time(), to_string(c.type), c.source, *reason);
  } else {
    ++stats_.commands_acked;
  }
  emit("event", std::move(ev));
}

std::optional<std::string> MissionRunner::step_mission(const autonomy::MissionEvent& e) {
  if (!plan_) return "no survey defined";
  const std::size_t logged = mission_.log.size();
  auto r = autonomy::mission_step(mission_, *plan_, e, time());
  if (r.rejected) return r.rejected;
  mission_ = std::move(r.state);
  plan_->status = std::move(r.status);
  for (std::size_t k = logged; k < mission_.log.size(); ++k) {
    Json ev = event("transition");
    ev["transition"] = mission_.log[k];
    emit("event", std::move(ev));
  }
  handle_action(r.action);
  return std::nullopt;
}

void MissionRunner::handle_action(const autonomy::MissionAction& action) {
  if (const auto* goal = std::get_if<autonomy::actions::SendGoal>(&action)) {
    progress_.clear();
    field_goal_ = -1;
    Json ev = event("goal");
    ev["goal"] = goal->index;
    ev["pose"] = goal->pose;
    emit("event", std::move(ev));
  } else if (std::holds_alternative<autonomy::actions::SafeStop>(action)) {
    robot_.command = {};
  } else if (std::holds_alternative<autonomy::actions::Finish>(action)) {
    end_mission(true);
  }
}

std::optional<std::string> MissionRunner::apply_define_survey(const Command& c) {
  if (started_) return "survey can only be defined before start";
  if (!c.survey) return "define_survey without a polygon";
  autonomy::SurveyPlan plan;
  try {
    plan = autonomy::plan_survey(c.survey->polygon, c.survey->row_spacing, c.survey->waypoint_spacing,
                                 c.survey->sweep_heading);
  } catch (const Error& e) {
    return std::string(e.what());
  }
  if (plan.waypoints.empty()) return "survey produced no waypoints";
  const Pose4 start = config_.start_pose.value_or(plan.waypoints.front().gravity_aligned());
  if (!world_.bounds().contains(start.t.head<2>())) return "start pose lies outside the world";
  plan_ = std::move(plan);
  mission_ = {};
  robot_ = sim::spawn_robot(world_, start.t.x(), start.t.y(), start.yaw, config_.robot);
  odom_ = robot_.pose.gravity_aligned();
  last_free_ = robot_.pose.t.head<2>();
  Json ev = event("plan");
  ev["plan"] = *plan_;
  emit("event", std::move(ev));
  return std::nullopt;
}

std::optional<std::string> MissionRunner::apply_start() {
  if (started_) return "mission already started";
  if (!plan_) return "define_survey is required before start";
  if (robot_.trapped) return "robot starts on impassable ground";
  const double t = time();
  start_time_ = t;
  started_ = true;
  graph_.add_node(odom_, Pose4::identity(), {}, t);
  node_odom_ = {odom_};
  node_truth_ = {robot_.pose.gravity_aligned()};
  trajectory_.push_back({t, robot_.pose.t});
  emit_graph(true);
  if (auto reason = step_mission(autonomy::events::Start{})) {
    started_ = false;
    graph_ = {};
    node_odom_.clear();
    node_truth_.clear();
    trajectory_.clear();
    return reason;
  }
  return std::nullopt;
}

std::optional<std::string> MissionRunner::apply_interrupt() {
  if (mission_.phase != autonomy::Phase::Executing) {
    return "interrupt is only legal while executing (phase " + autonomy::to_string(mission_.phase) + ")";
  }
  if (auto reason = step_mission(autonomy::events::OperatorInterrupt{})) return reason;
  metrics::InterventionRecord r;
  r.start = time();
  r.end = r.start;
  r.start_pose = robot_.pose.gravity_aligned();
  r.end_pose = r.start_pose;
  r.cause = robot_.trapped ? metrics::InterventionCause::Trapped : metrics::InterventionCause::Safety;
  open_record_ = r;
  Json ev = event("intervention_open");
  ev["cause"] = metrics::to_string(r.cause);
  emit("event", std::move(ev));
  return std::nullopt;
}

std::optional<std::string> MissionRunner::apply_push(const Command& c) {
  if (mission_.phase != autonomy::Phase::Paused) {
    return "push is only legal while paused (phase " + autonomy::to_string(mission_.phase) + ")";
  }
  const sim::RobotState before = robot_;
  try {
    robot_ = sim::apply_intervention(world_, robot_, sim::Push{c.push_distance, c.push_heading}, config_.robot);
  } catch (const sim::InterventionRejected& e) {
    return std::string(e.what());
  }
  const Vec2 stuck_at = odom_.t.head<2>();
  integrate_odometry(before);
  const double t = time();
  distance_ += (robot_.pose.t - before.pose.t).norm();
  trajectory_.push_back({t, robot_.pose.t});
  if (before.trapped && !robot_.trapped) ++stats_.rescues;
  if (before.trapped && !robot_.trapped && config_.rescue.no_go_radius > 0.0) {
    const Vec2 moved = odom_.t.head<2>() - stuck_at;
    const Vec2 ahead = moved.norm() > 1e-9 ? Vec2(-moved.normalized() * config_.rescue.no_go_offset) : Vec2::Zero();
    no_go_.emplace_back(stuck_at + ahead, config_.rescue.no_go_radius);
    field_goal_ = -1;
  }
  if (!world_.in_damp(robot_.pose.t.head<2>())) last_free_ = robot_.pose.t.head<2>();
  if (open_record_) {
    open_record_->end = t;
    open_record_->end_pose = robot_.pose.gravity_aligned();
    if (open_record_->cause == metrics::InterventionCause::Safety) {
      open_record_->cause = metrics::InterventionCause::Push;
    }
  }
  Json ev = event("push");
  ev["distance"] = c.push_distance;
  ev["heading"] = c.push_heading;
  ev["trapped"] = robot_.trapped;
  emit("event", std::move(ev));
  return std::nullopt;
}

std::optional<std::string> MissionRunner::apply_resume(const Command& c) {
  if (mission_.phase != autonomy::Phase::Paused) {
    return "resume is only legal while paused (phase " + autonomy::to_string(mission_.phase) + ")";
  }
  if (auto reason = step_mission(autonomy::events::OperatorResume{c.goal})) return reason;
  if (open_record_) {
    open_record_->end = time();
    open_record_->end_pose = robot_.pose.gravity_aligned();
    records_.push_back(*open_record_);
    Json ev = event("intervention_close");
    ev["cause"] = metrics::to_string(open_record_->cause);
    ev["duration"] = open_record_->duration();
    open_record_.reset();
    emit("event", std::move(ev));
  }
  trapped_since_ = -1.0;
  rescue_pushes_ = 0;
  progress_.clear();
  return std::nullopt;
}

std::optional<std::string> MissionRunner::apply_set_params(const Command& c) {
  auto cost = config_.cost;
  auto controller = config_.controller;
  auto traversability = config_.traversability;
  auto progress = config_.progress;
  double lethal = config_.lethal;
  try {
    for (const auto& [key, value] : c.params.items()) {
      if (key == "cost") {
        cost = value.get<autonomy::CostParams>();
        cost.validate();
      } else if (key == "controller") {
        controller = value.get<autonomy::ControllerParams>();
      } else if (key == "traversability") {
        traversability = value.get<autonomy::TraversabilityParams>();
      } else if (key == "progress") {
        progress.window = value_or(value, "window", progress.window);
        progress.min_progress = value_or(value, "min_progress", progress.min_progress);
      } else if (key == "lethal") {
        lethal = value.get<double>();
        if (!(lethal > 0.0)) return "lethal must be positive";
      } else {
        return "unknown parameter group '" + key + "'";
      }
    }
  } catch (const std::exception& e) {
    return std::string("bad parameters: ") + e.what();
  }
  config_.cost = cost;
  config_.controller = controller;
  config_.traversability = traversability;
  config_.progress = progress;
  config_.lethal = lethal;
  field_goal_ = -1;
  return std::nullopt;
}

// Loop

bool MissionRunner::tick() {
  if (ended_) {
    drain_commands();
    return false;
  }
  drain_commands();
  if (ended_) return false;
  if (!started_) {
    if (idle_calls_++ % every(1.0 / config_.state_rate, config_.tick_rate) == 0) emit_state();
    return true;
  }
  const double t = time();
  rescue_policy(t);
  if (ended_) return false;
  if (ticks_ % every(1.0 / config_.lidar.scan_rate_hz, config_.tick_rate) == 0) sense();
  maybe_add_node();
  sim::VelocityCommand cmd;
  if (mission_.phase == autonomy::Phase::Executing) cmd = control(t);
  if (ended_) return false;
  const sim::RobotState before = robot_;
  robot_ = sim::step_robot(world_, robot_, cmd, dt(), config_.robot);
  integrate_odometry(before);
  ++ticks_;
  const double now = time();
  distance_ += (robot_.pose.t.head<2>() - before.pose.t.head<2>()).norm();
  trajectory_.push_back({now, robot_.pose.t});
  if (!world_.in_damp(robot_.pose.t.head<2>())) last_free_ = robot_.pose.t.head<2>();

  if (ticks_ % every(1.0 / config_.state_rate, config_.tick_rate) == 0) emit_state();
  if (ticks_ % every(1.0, config_.tick_rate) == 0) emit_metrics();
  if (ticks_ % every(config_.terrain_patch_period, config_.tick_rate) == 0) emit_terrain_patch();
  if (now - start_time_ >= config_.max_time - 1e-9) {
    Json ev = event("timeout");
    emit("event", std::move(ev));
    end_mission(false);
  }
  return !ended_;
}

void MissionRunner::integrate_odometry(const sim::RobotState& before) {
  const Pose4 truth = before.pose.gravity_aligned().between(robot_.pose.gravity_aligned());
  if (truth.t.isZero(0.0) && truth.yaw == 0.0) return;
  const Pose4 measured = sim::measure_odometry(truth, config_.drift, odometry_rng_);
  odom_ = estimation::integrate_odometry(odom_, measured);
  const double step = measured.t.head<2>().norm();
  node_travel_ += step;
  scan_travel_ += step;
}

void MissionRunner::sense() {
  const Pose6 sensor = sim::sensor_pose(robot_, config_.robot);
  PointCloud cloud = sim::scan_lidar(world_, sensor, config_.lidar, lidar_rng_, options_.policy);
  const Eigen::Matrix3d tilt = sensor.tilt();
  for (auto& p : cloud.points) p = tilt * p;
  const Pose4 sensor_odom = odom_ * robot_.pose.gravity_aligned().between(sensor.gravity_aligned());
  estimation::update_terrain_map(terrain_, cloud, sensor_odom.isometry());
  accumulator_.add_scan({std::move(cloud), sensor_odom}, scan_travel_);
  scan_travel_ = 0.0;
  map_dirty_ = true;
  ++stats_.scans;
}

void MissionRunner::maybe_add_node(bool force) {
  if (graph_.empty()) return;
  if (node_travel_ < config_.node_spacing && !(force && node_travel_ > 0.0)) return;
  const double t = time();
  const Pose4 delta = node_odom_.back().between(odom_);
  const auto info = estimation::odometry_information(config_.drift, delta.t.head<2>().norm());
  const Pose4 estimate = estimation::integrate_odometry(graph_.back().pose, delta);
  const int id = graph_.add_node(estimate, delta, info, t);
  node_odom_.push_back(odom_);
  node_truth_.push_back(robot_.pose.gravity_aligned());
  node_travel_ = 0.0;
  const auto loops =
      estimation::detect_loop_closures(graph_, id, node_truth_, config_.loop_closure, registration_rng_);
  for (const auto& e : loops) {
    Json ev = event("loop_closure");
    ev["from"] = e.from;
    ev["to"] = e.to;
    emit("event", std::move(ev));
  }
  if (!loops.empty() || id % config_.optimize_every == 0) {
    optimize_and_reindex();
  } else {
    emit_graph(false);
  }
  if (accumulator_.pending_travel() >= config_.payload.travel_threshold) {
    if (auto payload = accumulator_.emit(id, odom_, graph_.node(id).pose, t)) handle_payload(std::move(*payload));
  }
}

void MissionRunner::optimize_and_reindex() {
  const auto r = estimation::optimize_graph(graph_);
  ++stats_.optimizations;
  if (r.final_cost > r.initial_cost) stats_.optimizer_monotone = false;
  emit_graph(true);
  std::map<int, Pose4> before;
  std::map<int, Pose4> after;
  for (const auto& [node, anchor] : inventory_.anchors()) {
    const Pose4& p = graph_.node(node).pose;
    if ((p.t - anchor.t).norm() > config_.reindex_translation ||
        std::abs(wrap_angle(p.yaw - anchor.yaw)) > config_.reindex_yaw) {
      before[node] = anchor;
      after[node] = p;
    }
  }
  if (!after.empty()) {
    inventory_.reindex_on_loop_closure(before, after);
    ++stats_.reindexes;
    emit_trees();
  }
}

void MissionRunner::handle_payload(estimation::DataPayload payload) {
  if (options_.write_artifacts) estimation::write_payload(config_.output_dir / "payloads", payload);
  const auto a = analysis::process_payload(inventory_, payload, options_.policy);
  ++stats_.payloads;
  payload_ids_.push_back(payload.id);
  Json ev = event("payload");
  ev["id"] = payload.id;
  ev["anchor_node"] = payload.anchor_node;
  ev["points"] = a.points;
  ev["ground_points"] = a.ground_points;
  ev["candidates"] = a.candidates;
  ev["cloth_iterations"] = a.cloth_iterations;
  ev["degenerate"] = a.degenerate;
  emit("event", std::move(ev));
  emit_trees();
}

sim::VelocityCommand MissionRunner::control(double t) {
  const int goal = mission_.goal;
  const Vec2 goal_odom = (odom_from_map() * plan_->waypoints[static_cast<std::size_t>(goal)].t).head<2>();
  const bool stale =
      !field_ || field_goal_ != goal || (map_dirty_ && t - last_plan_ >= config_.replan_period - 1e-9);
  if (stale) {
    replan(goal_odom);
    field_goal_ = goal;
    last_plan_ = t;
    map_dirty_ = false;
  }
  const auto out =
      autonomy::compute_velocity_command(*field_, odom_, goal_odom, config_.robot.limits, config_.controller);
  if (out.signal == autonomy::ControlSignal::GoalReached) {
    step_mission(autonomy::events::GoalReached{});
    return {};
  }
  progress_.push_back({t, (goal_odom - odom_.t.head<2>()).norm()});
  while (progress_.size() > 2 && progress_[1].t <= t - config_.progress.window) progress_.pop_front();
  if (autonomy::check_progress(progress_, config_.progress, goal_blocked_) == autonomy::Progress::Unreachable) {
    Json ev = event("goal_unreachable");
    ev["goal"] = goal;
    ev["reason"] = goal_blocked_ ? "goal blocked" : "no progress";
    emit("event", std::move(ev));
    ++stats_.skipped_goals;
    step_mission(autonomy::events::GoalUnreachable{});
    return {};
  }
  return out.command;
}

void MissionRunner::replan(const Vec2& goal_odom) {
  layer_ = autonomy::score_traversability(terrain_, config_.traversability, options_.policy);
  Grid2D<double> cost = autonomy::compute_cost(*layer_, config_.cost);
  const double lethal = config_.lethal;
  const Vec2 robot = odom_.t.head<2>();
  const double footprint = 0.4;
  std::vector<std::pair<Vec2, double>> discs;
  for (const auto& [p, r] : no_go_) {
    const double keep = std::min(r, (robot - p).norm() - 2.0 * footprint);
    if (keep > 0.0) discs.emplace_back(p, keep);
  }
  for (std::size_t i = 0; i < cost.size(); ++i) {
    const Vec2 c = cost.center(cost.unlinear(i));
    for (const auto& [p, r] : discs) {
      if ((c - p).squaredNorm() <= r * r) cost[i] = std::max(cost[i], lethal);
    }
    if ((c - robot).squaredNorm() <= footprint * footprint) cost[i] = std::min(cost[i], 0.5 * lethal);
  }
  const double inset = 0.5;
  const Vec2 lo = cost.origin() + Vec2(inset, inset);
  const Vec2 hi = cost.origin() + Vec2(cost.nx(), cost.ny()) * cost.resolution() - Vec2(inset, inset);
  auto inside = [&](const Vec2& p) { return p.x() >= lo.x() && p.y() >= lo.y() && p.x() <= hi.x() && p.y() <= hi.y(); };
  Vec2 target = goal_odom;
  bool intermediate = false;
  if (!inside(goal_odom)) {
    intermediate = true;
    const Vec2 d = goal_odom - robot;
    double s = 1.0;
    for (int k = 0; k < 2; ++k) {
      if (d[k] > 0.0) s = std::min(s, (hi[k] - robot[k]) / d[k]);
      if (d[k] < 0.0) s = std::min(s, (lo[k] - robot[k]) / d[k]);
    }
    target = robot + std::max(0.0, s) * d;
  }
  field_ = autonomy::compute_gdf(cost, target, lethal);
  goal_blocked_ = false;
  if (field_->goal_blocked) {
    if (!intermediate) {
      goal_blocked_ = true;
    } else {
      const CellIndex tc = cost.cell_of(target);
      const int reach = static_cast<int>(std::ceil(3.0 / cost.resolution()));
      std::optional<CellIndex> best;
      double best_d = 1e300;
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          const CellIndex c{tc.x + dx, tc.y + dy};
          if (!cost.inside(c) || cost.at(c) >= lethal) continue;
          const double d = dx * dx + dy * dy;
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
      }
      if (best) field_ = autonomy::compute_gdf(cost, *best, lethal);
    }
  }
  ++stats_.replans;
}

void MissionRunner::rescue_policy(double t) {
  if (config_.policy != InterventionPolicy::RescueOnTrapped) return;
  if (!robot_.trapped) {
    trapped_since_ = -1.0;
    return;
  }
  if (trapped_since_ < 0.0) {
    trapped_since_ = t;
    rescue_pushes_ = 0;
    if (mission_.phase == autonomy::Phase::Executing) {
      Command c;
      c.type = CommandType::Interrupt;
      c.source = "policy";
      apply(c);
    }
    return;
  }
  if (mission_.phase != autonomy::Phase::Paused || t - trapped_since_ < config_.rescue.wait - 1e-9) return;
  const Vec2 here = robot_.pose.t.head<2>();
  Vec2 dir = last_free_ - here;
  if (dir.norm() < 1e-6) dir = -Vec2(std::cos(robot_.pose.yaw), std::sin(robot_.pose.yaw));
  Command push;
  push.type = CommandType::Push;
  push.source = "policy";
  push.push_heading = std::atan2(dir.y(), dir.x());
  push.push_distance = config_.rescue.push_distance;
  const double to_free = (last_free_ - here).norm();
  while (push.push_distance > to_free && world_.in_damp(here + push.push_distance * dir.normalized())) {
    push.push_distance = std::max(to_free, push.push_distance - 0.1);
  }
  apply(push);
  ++rescue_pushes_;
  if (!robot_.trapped) {
    Command resume;
    resume.type = CommandType::Resume;
    resume.source = "policy";
    const int goal = mission_.goal;
    if (goal_rescues_.first != goal) goal_rescues_ = {goal, 0};
    ++goal_rescues_.second;
    const bool skip = config_.rescue.skip_after > 0 && goal_rescues_.second >= config_.rescue.skip_after &&
                      goal + 1 < static_cast<int>(plan_->size());
    resume.goal = skip ? goal + 1 : goal;
    apply(resume);
  } else if (rescue_pushes_ >= config_.rescue.max_pushes) {
    Json ev = event("rescue_failed");
    emit("event", std::move(ev));
    end_mission(false);
  }
}

void MissionRunner::end_mission(bool completed) {
  if (ended_) return;
  if (!completed && (mission_.phase == autonomy::Phase::Executing || mission_.phase == autonomy::Phase::Paused)) {
    const std::size_t logged = mission_.log.size();
    auto r = autonomy::mission_step(mission_, *plan_, autonomy::events::Abort{}, time());
    if (!r.rejected) {
      mission_ = std::move(r.state);
      plan_->status = std::move(r.status);
      for (std::size_t k = logged; k < mission_.log.size(); ++k) {
        Json ev = event("transition");
        ev["transition"] = mission_.log[k];
        emit("event", std::move(ev));
      }
    }
  }
  ended_ = true;
  completed_ = completed;
  end_time_ = time();
  robot_.command = {};
  Json ev = event("mission_end");
  ev["completed"] = completed;
  emit("event", std::move(ev));
  emit_state();
}

metrics::MissionReport MissionRunner::run() {
  load_config_commands();
  while (tick()) {
  }
  return finish();
}

metrics::MissionReport MissionRunner::finish() {
  if (finished_) throw Error("mission already finished");
  if (!ended_) end_mission(false);
  finished_ = true;
  if (started_) {
    maybe_add_node(true);
    if (auto payload =
            accumulator_.flush(graph_.back().id, node_odom_.back(), graph_.back().pose, end_time_)) {
      handle_payload(std::move(*payload));
    }
    optimize_and_reindex();
  }
  if (open_record_) {
    open_record_->end = end_time_;
    open_record_->end_pose = robot_.pose.gravity_aligned();
    records_.push_back(*open_record_);
    open_record_.reset();
  }
  metrics::MissionRecord record;
  record.start = start_time_;
  record.end = end_time_;
  record.completed = completed_;
  record.trajectory = trajectory_;
  record.interventions = records_;
  auto report = metrics::build_report(record, static_cast<int>(inventory_.trees().size()), config_.coverage,
                                      options_.policy);
  const InventoryScore score = score_inventory(world_, inventory_, inventory_.params().merge_radius);
  Json estimation = {{"nodes", graph_.size()},
                     {"loop_edges", graph_.loop_edge_count()},
                     {"optimizations", stats_.optimizations},
                     {"optimizer_monotone", stats_.optimizer_monotone}};
  if (!graph_.empty()) {
    estimation["final_error_optimized"] = (graph_.back().pose.t - node_truth_.back().t).norm();
    estimation["final_error_odometry"] = (node_odom_.back().t - node_truth_.back().t).norm();
  }
  Json mission = {{"goals", plan_ ? plan_->size() : 0},
                  {"skipped_goals", mission_.skipped},
                  {"payloads", stats_.payloads},
                  {"scans", stats_.scans},
                  {"rescues", stats_.rescues},
                  {"phase", autonomy::to_string(mission_.phase)}};
  report.evaluation = {{"inventory", score}, {"estimation", estimation}, {"mission", mission}};

  if (options_.write_artifacts) {
    const auto& dir = config_.output_dir;
    Json cfg = config_;
    write_json_file(dir / "config.json", cfg);
    write_json_file(dir / "world.json", Json(config_.world));
    if (plan_) write_json_file(dir / "plan.json", Json(*plan_));
    write_text_file(dir / "segments.csv", metrics::segments_csv(report.segments));
    write_text_file(dir / "interventions.csv", metrics::interventions_csv(records_));
    std::ostringstream traj;
    traj.precision(17);
    traj << "t,x,y,z\n";
    for (const auto& s : trajectory_) {
      traj << s.t << ',' << s.position.x() << ',' << s.position.y() << ',' << s.position.z() << '\n';
    }
    write_text_file(dir / "trajectory.csv", traj.str());
    estimation::write_g2o(dir / "pose_graph.g2o", graph_);
    write_json_file(dir / "pose_graph.json", estimation::graph_json(graph_));
    write_json_file(dir / "inventory.json", analysis::inventory_json(inventory_));
    analysis::export_marteloscope(inventory_, dir);
    report.exports = {{"config", "config.json"},
                      {"world", "world.json"},
                      {"plan", "plan.json"},
                      {"segments", "segments.csv"},
                      {"interventions", "interventions.csv"},
                      {"trajectory", "trajectory.csv"},
                      {"pose_graph", "pose_graph.g2o"},
                      {"pose_graph_json", "pose_graph.json"},
                      {"inventory", "inventory.json"},
                      {"marteloscope_csv", "marteloscope.csv"},
                      {"marteloscope_geojson", "marteloscope.geojson"},
                      {"marteloscope_svg", "marteloscope.svg"},
                      {"payloads", "payloads"},
                      {"events", "events.jsonl"},
                      {"report_text", "report.txt"}};
    write_json_file(dir / "report.json", Json(report));
    write_text_file(dir / "report.txt", metrics::report_text(report));
  }
  emit_metrics();
  Json ev = event("report");
  ev["report"] = report;
  emit("event", std::move(ev));
  if (events_.is_open()) events_.flush();
  return report;
}

// Messages

Json MissionRunner::event(const std::string& kind) const { return Json{{"kind", kind}}; }

void MissionRunner::emit(const std::string& type, Json data) {
  const Json msg = make_message(type, ++seq_, time(), std::move(data));
  if (events_.is_open()) events_ << msg.dump() << '\n';
  if (sink_) sink_(msg);
}

void MissionRunner::emit_state() {
  Json data = {{"phase", autonomy::to_string(mission_.phase)},
               {"goal", mission_.goal},
               {"goals", plan_ ? plan_->size() : 0},
               {"pose", pose_json(robot_.pose.gravity_aligned())},
               {"estimate", pose_json(estimated_pose())},
               {"velocity", velocity_json(robot_.command)},
               {"trapped", robot_.trapped},
               {"intervention", open_record_.has_value()},
               {"distance", distance_},
               {"mission_time", started_ ? time() - start_time_ : 0.0}};
  emit("state", std::move(data));
}

void MissionRunner::emit_metrics() {
  const double t = ended_ ? end_time_ : time();
  std::vector<metrics::InterventionRecord> closed = records_;
  if (open_record_) {
    auto r = *open_record_;
    r.end = t;
    closed.push_back(r);
  }
  Json data = {{"mission_time", t - start_time_}, {"distance", distance_}, {"interventions", closed.size()},
               {"trees", inventory_.trees().size()}};
  try {
    const auto segments = metrics::compute_segments(trajectory_, closed, start_time_, t);
    const auto between = metrics::compute_mdbi_mtbi(segments);
    data["mdbi"] = between ? Json(between->mdbi) : Json();
    data["mtbi"] = between ? Json(between->mtbi) : Json();
  } catch (const Error&) {
    data["mdbi"] = nullptr;
    data["mtbi"] = nullptr;
  }
  emit("metrics", std::move(data));
}

void MissionRunner::emit_terrain_patch() {
  if (!layer_) return;
  const auto& score = layer_->score;
  const int f = std::max(1, static_cast<int>(std::lround(0.5 / score.resolution())));
  const int nx = score.nx() / f;
  const int ny = score.ny() / f;
  Json cells = Json::array();
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      double v = 2.0;
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) {
          if (layer_->known.at(x * f + dx, y * f + dy)) v = std::min(v, score.at(x * f + dx, y * f + dy));
        }
      }
      cells.push_back(v > 1.5 ? -1 : static_cast<int>(std::lround(100.0 * v)));
    }
  }
  const Vec2 origin = score.origin();
  emit("terrain_patch", {{"frame", "odom"},
                         {"origin", {origin.x(), origin.y()}},
                         {"resolution", score.resolution() * f},
                         {"nx", nx},
                         {"ny", ny},
                         {"odom_from_map", pose_json(odom_from_map())},
                         {"cells", std::move(cells)}});
}

void MissionRunner::emit_graph(bool full) {
  Json nodes = Json::array();
  const std::size_t first = full ? 0 : graph_.size() - 1;
  for (std::size_t k = first; k < graph_.size(); ++k) {
    const auto& n = graph_.nodes()[k];
    nodes.push_back({n.id, n.pose.t.x(), n.pose.t.y(), n.pose.t.z(), n.pose.yaw});
  }
  Json data = {{"full", full}, {"nodes", std::move(nodes)}};
  if (full) {
    Json loops = Json::array();
    for (const auto& e : graph_.edges()) {
      if (e.kind == estimation::EdgeKind::Loop) loops.push_back({e.from, e.to});
    }
    data["loops"] = std::move(loops);
  }
  emit("graph_update", std::move(data));
}

void MissionRunner::emit_trees() {
  Json trees = Json::array();
  for (const auto& row : analysis::marteloscope_rows(inventory_)) {
    trees.push_back({{"id", row.id},
                     {"x", row.x},
                     {"y", row.y},
                     {"dbh", row.dbh ? Json(*row.dbh) : Json()},
                     {"height", row.height},
                     {"coverage_bins", row.coverage_bins},
                     {"flags", row.flags}});
  }
  emit("tree_update", {{"revision", inventory_.revision()}, {"trees", std::move(trees)}});
}

}  // namespace sylva::service
