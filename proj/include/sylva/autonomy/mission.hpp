#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sylva/autonomy/survey.hpp"
#include "sylva/common/json.hpp"

namespace sylva::autonomy {

enum class Phase { Idle, Executing, Paused, Completed, Aborted };

std::string to_string(Phase p);

namespace events {
struct Start {};
struct GoalReached {};
struct GoalUnreachable {};
struct OperatorInterrupt {};
struct OperatorResume {
  int goal = 0;
};
struct PlanExhausted {};
struct Abort {};
}  // namespace events

using MissionEvent = std::variant<events::Start, events::GoalReached, events::GoalUnreachable,
                                  events::OperatorInterrupt, events::OperatorResume, events::PlanExhausted,
                                  events::Abort>;

std::string event_name(const MissionEvent& e);

struct Transition {
  double t = 0.0;
  Phase from = Phase::Idle;
  Phase to = Phase::Idle;
  std::string event;
  int goal = -1;
};

void to_json(Json& j, const Transition& t);

struct MissionState {
  Phase phase = Phase::Idle;
  int goal = -1;  // index into the plan, -1 before start
  std::vector<int> skipped;
  std::vector<Transition> log;
};

namespace actions {
struct None {};
struct SendGoal {
  int index = 0;
  Pose6 pose;
};
struct SafeStop {};
struct Finish {};
}  // namespace actions

using MissionAction = std::variant<actions::None, actions::SendGoal, actions::SafeStop, actions::Finish>;

struct StepResult {
  MissionState state;
  std::vector<WaypointStatus> status;
  MissionAction action;
  std::optional<std::string> rejected;  // reason; state and status unchanged when set
};

bool is_legal(Phase from, Phase to);

/// Mission planner transition function. Illegal events are rejected with a
/// reason and leave the inputs untouched.
StepResult mission_step(const MissionState& state, const SurveyPlan& plan, const MissionEvent& event, double t);

}  // namespace sylva::autonomy
