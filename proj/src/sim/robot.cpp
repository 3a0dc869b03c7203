#include "sylva/sim/robot.hpp"

#include <algorithm>
#include <cmath>

namespace sylva::sim {

VelocityCommand VelocityLimits::clamp(const VelocityCommand& cmd) const {
  return {std::clamp(cmd.vx, -vx_max, vx_max), std::clamp(cmd.vy, -vy_max, vy_max),
          std::clamp(cmd.yaw_rate, -yaw_rate_max, yaw_rate_max)};
}

bool VelocityLimits::within(const VelocityCommand& cmd) const {
  return std::abs(cmd.vx) <= vx_max && std::abs(cmd.vy) <= vy_max && std::abs(cmd.yaw_rate) <= yaw_rate_max;
}

void to_json(Json& j, const RobotParams& p) {
  j = Json{{"vx_max", p.limits.vx_max},
           {"vy_max", p.limits.vy_max},
           {"yaw_rate_max", p.limits.yaw_rate_max},
           {"hip_height", p.hip_height},
           {"sensor_height", p.sensor_height},
           {"bush_speed_factor", p.bush_speed_factor},
           {"max_push", p.max_push}};
}

void from_json(const Json& j, RobotParams& p) {
  p = RobotParams{};
  p.limits.vx_max = value_or(j, "vx_max", p.limits.vx_max);
  p.limits.vy_max = value_or(j, "vy_max", p.limits.vy_max);
  p.limits.yaw_rate_max = value_or(j, "yaw_rate_max", p.limits.yaw_rate_max);
  p.hip_height = value_or(j, "hip_height", p.hip_height);
  p.sensor_height = value_or(j, "sensor_height", p.sensor_height);
  p.bush_speed_factor = value_or(j, "bush_speed_factor", p.bush_speed_factor);
  p.max_push = value_or(j, "max_push", p.max_push);
}

namespace {

void snap_to_terrain(const World& world, Pose6& pose, double hip_height) {
  pose.t.z() = world.terrain_height(pose.t.x(), pose.t.y()) + hip_height;
  const Vec2 g = world.terrain_gradient(pose.t.x(), pose.t.y());
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  const double forward = g.x() * c + g.y() * s;
  const double lateral = -g.x() * s + g.y() * c;
  pose.pitch = -std::atan(forward);
  pose.roll = std::atan(lateral);
}

}  // namespace

RobotState spawn_robot(const World& world, double x, double y, double yaw, const RobotParams& params) {
  RobotState state;
  state.pose.t = {x, y, 0.0};
  state.pose.yaw = wrap_angle(yaw);
  snap_to_terrain(world, state.pose, params.hip_height);
  state.trapped = world.in_damp({x, y});
  return state;
}

Pose6 sensor_pose(const RobotState& state, const RobotParams& params) {
  Pose6 s = state.pose;
  s.t += state.pose.rotation() * Vec3(0.0, 0.0, params.sensor_height);
  return s;
}

RobotState step_robot(const World& world, const RobotState& state, const VelocityCommand& cmd, double dt,
                      const RobotParams& params) {
  RobotState next = state;
  next.clock = state.clock + dt;
  next.command = params.limits.clamp(cmd);
  if (state.trapped || next.command.is_zero()) {
    if (state.trapped) next.command = {};
    return next;
  }
  double scale = 1.0;
  if (world.in_bush(state.pose.t.head<2>())) {
    scale = params.bush_speed_factor;
  }
  const double vx = next.command.vx * scale;
  const double vy = next.command.vy * scale;
  const double c = std::cos(state.pose.yaw);
  const double s = std::sin(state.pose.yaw);
  next.pose.t.x() = state.pose.t.x() + (vx * c - vy * s) * dt;
  next.pose.t.y() = state.pose.t.y() + (vx * s + vy * c) * dt;
  next.pose.yaw = wrap_angle(state.pose.yaw + next.command.yaw_rate * scale * dt);
  const Rect b = world.bounds();
  next.pose.t.x() = std::clamp(next.pose.t.x(), b.min_x, b.max_x);
  next.pose.t.y() = std::clamp(next.pose.t.y(), b.min_y, b.max_y);
  snap_to_terrain(world, next.pose, params.hip_height);
  if (world.in_damp(next.pose.t.head<2>())) {
    next.trapped = true;
  }
  return next;
}

RobotState apply_intervention(const World& world, const RobotState& state, const InterventionAction& action,
                              const RobotParams& params) {
  if (std::holds_alternative<Release>(action)) {
    RobotState next = state;
    next.trapped = false;
    return next;
  }
  const Push& push = std::get<Push>(action);
  if (!std::isfinite(push.distance) || !std::isfinite(push.heading) || push.distance < 0.0 ||
      push.distance > params.max_push) {
    throw InterventionRejected("push distance outside [0, " + std::to_string(params.max_push) + "] m");
  }
  const Vec2 target = state.pose.t.head<2>() + push.distance * Vec2(std::cos(push.heading), std::sin(push.heading));
  if (!world.bounds().contains(target)) {
    throw InterventionRejected("push target outside the world");
  }
  RobotState next = state;
  next.pose.t.x() = target.x();
  next.pose.t.y() = target.y();
  snap_to_terrain(world, next.pose, params.hip_height);
  next.trapped = world.in_damp(target);
  next.command = {};
  return next;
}

void DriftModel::validate() const {
  if (translation_noise < 0.0 || yaw_noise < 0.0 || z_noise < 0.0) {
    throw ConfigError("drift sigmas must be non-negative");
  }
}

void to_json(Json& j, const DriftModel& d) {
  j = Json{{"translation_noise", d.translation_noise},
           {"yaw_noise", d.yaw_noise},
           {"yaw_bias", d.yaw_bias},
           {"z_noise", d.z_noise}};
}

void from_json(const Json& j, DriftModel& d) {
  d = DriftModel{};
  d.translation_noise = value_or(j, "translation_noise", d.translation_noise);
  d.yaw_noise = value_or(j, "yaw_noise", d.yaw_noise);
  d.yaw_bias = value_or(j, "yaw_bias", d.yaw_bias);
  d.z_noise = value_or(j, "z_noise", d.z_noise);
}

Pose4 measure_odometry(const Pose4& true_delta, const DriftModel& drift, Rng& noise) {
  const double length = true_delta.t.head<2>().norm();
  const double root = std::sqrt(length);
  const double nx = draw_normal(noise);
  const double ny = draw_normal(noise);
  const double nz = draw_normal(noise);
  const double nyaw = draw_normal(noise);
  if (length == 0.0 || drift.is_zero()) {
    return true_delta;
  }
  Pose4 out = true_delta;
  out.t.x() += drift.translation_noise * root * nx;
  out.t.y() += drift.translation_noise * root * ny;
  out.t.z() += drift.z_noise * root * nz;
  out.yaw = wrap_angle(true_delta.yaw + drift.yaw_noise * root * nyaw + drift.yaw_bias * length);
  return out;
}

}  // namespace sylva::sim
