#pragma once

#include <variant>

#include "sylva/common/error.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/random.hpp"
#include "sylva/sim/world.hpp"

namespace sylva::sim {

/// Body-frame velocity command: forward, lateral, yaw rate.
struct VelocityCommand {
  double vx = 0.0;
  double vy = 0.0;
  double yaw_rate = 0.0;

  bool is_zero() const { return vx == 0.0 && vy == 0.0 && yaw_rate == 0.0; }
  bool operator==(const VelocityCommand&) const = default;
};

struct VelocityLimits {
  double vx_max = 0.6;
  double vy_max = 0.2;
  double yaw_rate_max = 0.6;

  VelocityCommand clamp(const VelocityCommand& cmd) const;
  bool within(const VelocityCommand& cmd) const;
};

struct RobotParams {
  VelocityLimits limits;
  double hip_height = 0.55;
  double sensor_height = 0.25;  // LiDAR above the body origin
  double bush_speed_factor = 0.3;
  double max_push = 5.0;
};

void to_json(Json& j, const RobotParams& p);
void from_json(const Json& j, RobotParams& p);

struct RobotState {
  Pose6 pose;
  VelocityCommand command;
  bool trapped = false;
  double clock = 0.0;

  bool operator==(const RobotState&) const = default;
};

/// Places the robot at (x, y, yaw) on the terrain surface.
RobotState spawn_robot(const World& world, double x, double y, double yaw, const RobotParams& params);

/// Sensor pose for a given body pose.
Pose6 sensor_pose(const RobotState& state, const RobotParams& params);

/// Planar unicycle-with-sideslip Euler step; z and roll/pitch snap to the
/// terrain. Damp patches trap the robot, bushes slow it down.
RobotState step_robot(const World& world, const RobotState& state, const VelocityCommand& cmd, double dt,
                      const RobotParams& params);

struct Push {
  double distance = 0.0;  // m
  double heading = 0.0;   // world-frame direction, rad
};
struct Release {};
using InterventionAction = std::variant<Push, Release>;

class InterventionRejected : public Error {
 public:
  using Error::Error;
};

/// Safety-operator action. Pushes beyond `max_push` or out of the world are
/// rejected and leave the state untouched.
RobotState apply_intervention(const World& world, const RobotState& state, const InterventionAction& action,
                              const RobotParams& params);

struct DriftModel {
  double translation_noise = 0.004;  // m per sqrt(m)
  double yaw_noise = 0.0004;         // rad per sqrt(m)
  double yaw_bias = 0.0001;          // rad per m
  double z_noise = 0.002;            // m per sqrt(m)

  void validate() const;
  bool is_zero() const {
    return translation_noise == 0.0 && yaw_noise == 0.0 && yaw_bias == 0.0 && z_noise == 0.0;
  }
};

void to_json(Json& j, const DriftModel& d);
void from_json(const Json& j, DriftModel& d);

/// Noisy gravity-aligned odometry increment. Noise standard deviations grow
/// with the square root of the horizontal distance travelled.
Pose4 measure_odometry(const Pose4& true_delta, const DriftModel& drift, Rng& noise);

}  // namespace sylva::sim
