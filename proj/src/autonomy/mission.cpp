#include "sylva/autonomy/mission.hpp"

namespace sylva::autonomy {

std::string to_string(Phase p) {
  switch (p) {
    case Phase::Idle: return "idle";
    case Phase::Executing: return "executing";
    case Phase::Paused: return "paused";
    case Phase::Completed: return "completed";
    case Phase::Aborted: return "aborted";
  }
  return "idle";
}

std::string event_name(const MissionEvent& e) {
  struct {
    std::string operator()(const events::Start&) const { return "start"; }
    std::string operator()(const events::GoalReached&) const { return "goal_reached"; }
    std::string operator()(const events::GoalUnreachable&) const { return "goal_unreachable"; }
    std::string operator()(const events::OperatorInterrupt&) const { return "operator_interrupt"; }
    std::string operator()(const events::OperatorResume&) const { return "operator_resume"; }
    std::string operator()(const events::PlanExhausted&) const { return "plan_exhausted"; }
    std::string operator()(const events::Abort&) const { return "abort"; }
  } visitor;
  return std::visit(visitor, e);
}

void to_json(Json& j, const Transition& t) {
  j = Json{{"t", t.t}, {"from", to_string(t.from)}, {"to", to_string(t.to)}, {"event", t.event}, {"goal", t.goal}};
}

bool is_legal(Phase from, Phase to) {
  switch (from) {
    case Phase::Idle: return to == Phase::Executing;
    case Phase::Executing:
      return to == Phase::Executing || to == Phase::Paused || to == Phase::Completed || to == Phase::Aborted;
    case Phase::Paused: return to == Phase::Executing || to == Phase::Aborted;
    default: return false;
  }
}

namespace {

int next_pending(const std::vector<WaypointStatus>& status, int from) {
  for (int i = std::max(from, 0); i < static_cast<int>(status.size()); ++i) {
    if (status[i] == WaypointStatus::Pending) return i;
  }
  return -1;
}

StepResult reject(const MissionState& s, const SurveyPlan& plan, std::string reason) {
  return {s, plan.status, actions::None{}, std::move(reason)};
}

}  // namespace

StepResult mission_step(const MissionState& state, const SurveyPlan& plan, const MissionEvent& event, double t) {
  StepResult out{state, plan.status, actions::None{}, std::nullopt};
  if (out.status.size() != plan.waypoints.size()) {
    out.status.assign(plan.waypoints.size(), WaypointStatus::Pending);
  }
  const std::string name = event_name(event);
  auto record = [&](Phase to) {
    out.state.log.push_back({t, state.phase, to, name, out.state.goal});
    out.state.phase = to;
  };
  auto advance = [&](int from) {
    const int next = next_pending(out.status, from);
    if (next < 0) {
      out.state.goal = static_cast<int>(plan.waypoints.size());
      record(Phase::Completed);
      out.action = actions::Finish{};
    } else {
      out.state.goal = next;
      record(Phase::Executing);
      out.action = actions::SendGoal{next, plan.waypoints[next]};
    }
  };
  const bool executing = state.phase == Phase::Executing;

  if (std::holds_alternative<events::Start>(event)) {
    if (state.phase != Phase::Idle) return reject(state, plan, "start is only legal when idle");
    if (plan.waypoints.empty()) return reject(state, plan, "no survey defined");
    advance(0);
  } else if (std::holds_alternative<events::GoalReached>(event) ||
             std::holds_alternative<events::GoalUnreachable>(event)) {
    if (!executing) return reject(state, plan, name + " is only legal while executing");
    if (state.goal < 0 || state.goal >= static_cast<int>(plan.waypoints.size())) {
      return reject(state, plan, "no active goal");
    }
    if (std::holds_alternative<events::GoalReached>(event)) {
      out.status[state.goal] = WaypointStatus::Reached;
    } else {
      out.status[state.goal] = WaypointStatus::Skipped;
      out.state.skipped.push_back(state.goal);
    }
    advance(state.goal + 1);
  } else if (std::holds_alternative<events::OperatorInterrupt>(event)) {
    if (!executing) return reject(state, plan, "interrupt is only legal while executing");
    record(Phase::Paused);
    out.action = actions::SafeStop{};
  } else if (const auto* resume = std::get_if<events::OperatorResume>(&event)) {
    if (state.phase != Phase::Paused) return reject(state, plan, "resume is only legal while paused");
    if (resume->goal < 0 || resume->goal >= static_cast<int>(plan.waypoints.size())) {
      return reject(state, plan, "resume goal index out of range");
    }
    out.status[resume->goal] = WaypointStatus::Pending;
    out.state.goal = resume->goal;
    record(Phase::Executing);
    out.action = actions::SendGoal{resume->goal, plan.waypoints[resume->goal]};
  } else if (std::holds_alternative<events::PlanExhausted>(event)) {
    if (!executing) return reject(state, plan, "plan_exhausted is only legal while executing");
    record(Phase::Completed);
    out.action = actions::Finish{};
  } else if (std::holds_alternative<events::Abort>(event)) {
    if (state.phase != Phase::Executing && state.phase != Phase::Paused) {
      return reject(state, plan, "abort is only legal while executing or paused");
    }
    record(Phase::Aborted);
    out.action = actions::SafeStop{};
  }
  return out;
}

}  // namespace sylva::autonomy
