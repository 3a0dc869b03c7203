#pragma once

#include <deque>

#include "sylva/autonomy/gdf.hpp"
#include "sylva/common/json.hpp"
#include "sylva/sim/robot.hpp"

namespace sylva::autonomy {

struct ControllerParams {
  double heading_gain = 1.5;
  double goal_tolerance = 0.3;  // m
  double slow_radius = 1.0;     // m; speed ramps down inside this distance
};

void to_json(Json& j, const ControllerParams& p);
void from_json(const Json& j, ControllerParams& p);

enum class ControlSignal { None, GoalReached, LocalMinimum };

struct ControlOutput {
  sim::VelocityCommand command;
  ControlSignal signal = ControlSignal::None;
};

/// Follows the negative field gradient at the robot position. `goal` is the
/// final target (it may lie beyond the field when the field goal is a
/// clamped intermediate).
ControlOutput compute_velocity_command(const GeodesicField& field, const Pose4& robot, const Vec2& goal,
                                       const sim::VelocityLimits& limits, const ControllerParams& params = {});

/// Descent direction of the field at `p` (unit vector), if defined.
std::optional<Vec2> descent_direction(const GeodesicField& field, const Vec2& p);

struct ProgressSample {
  double t = 0.0;
  double distance = 0.0;
};

struct ProgressParams {
  double window = 15.0;       // s
  double min_progress = 0.5;  // m
};

enum class Progress { Reachable, Unreachable };

/// Unreachable if the goal is blocked, or if distance-to-goal shrank by less
/// than `min_progress` over the trailing window. Histories shorter than the
/// window are reachable.
Progress check_progress(const std::deque<ProgressSample>& history, const ProgressParams& params,
                        bool goal_blocked = false);

}  // namespace sylva::autonomy
