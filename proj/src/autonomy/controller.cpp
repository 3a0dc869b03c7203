#include "sylva/autonomy/controller.hpp"

#include <algorithm>
#include <cmath>

namespace sylva::autonomy {

void to_json(Json& j, const ControllerParams& p) {
  j = Json{{"heading_gain", p.heading_gain}, {"goal_tolerance", p.goal_tolerance}, {"slow_radius", p.slow_radius}};
}

void from_json(const Json& j, ControllerParams& p) {
  p = ControllerParams{};
  p.heading_gain = value_or(j, "heading_gain", p.heading_gain);
  p.goal_tolerance = value_or(j, "goal_tolerance", p.goal_tolerance);
  p.slow_radius = value_or(j, "slow_radius", p.slow_radius);
}

namespace {

std::optional<double> bilinear(const Grid2D<double>& f, const Vec2& p) {
  const double res = f.resolution();
  const double fx = (p.x() - f.origin().x()) / res - 0.5;
  const double fy = (p.y() - f.origin().y()) / res - 0.5;
  const int ix = static_cast<int>(std::floor(fx));
  const int iy = static_cast<int>(std::floor(fy));
  if (!f.inside(ix, iy) || !f.inside(ix + 1, iy + 1)) return std::nullopt;
  const double v00 = f.at(ix, iy);
  const double v10 = f.at(ix + 1, iy);
  const double v01 = f.at(ix, iy + 1);
  const double v11 = f.at(ix + 1, iy + 1);
  if (!(std::isfinite(v00) && std::isfinite(v10) && std::isfinite(v01) && std::isfinite(v11))) return std::nullopt;
  const double u = fx - ix;
  const double v = fy - iy;
  return (1 - v) * ((1 - u) * v00 + u * v10) + v * ((1 - u) * v01 + u * v11);
}

/// Central differences of the bilinear interpolant at half-cell offsets.
/// Fails when the stencil touches unreachable or outside cells.
std::optional<Vec2> bilinear_gradient(const Grid2D<double>& f, const Vec2& p) {
  const double h = 0.5 * f.resolution();
  const auto xp = bilinear(f, p + Vec2(h, 0));
  const auto xm = bilinear(f, p - Vec2(h, 0));
  const auto yp = bilinear(f, p + Vec2(0, h));
  const auto ym = bilinear(f, p - Vec2(0, h));
  if (!xp || !xm || !yp || !ym) return std::nullopt;
  return Vec2((*xp - *xm) / (2 * h), (*yp - *ym) / (2 * h));
}

}  // namespace

std::optional<Vec2> descent_direction(const GeodesicField& field, const Vec2& p) {
  const auto& f = field.distance;
  const auto cell = f.find_cell(p);
  if (!cell || !field.reachable(*cell)) return std::nullopt;
  if (*cell == field.goal) {
    const Vec2 d = f.center(field.goal) - p;
    if (d.norm() < 1e-12) return std::nullopt;
    return d.normalized();
  }
  if (const auto g = bilinear_gradient(f, p); g && g->norm() > 1e-12) {
    return Vec2(-*g / g->norm());
  }
  // Near obstacles the interpolation stencil touches unreachable cells:
  // step toward the best neighbour instead.
  double best = f.at(*cell);
  Vec2 dir = Vec2::Zero();
  for (int dj = -1; dj <= 1; ++dj) {
    for (int di = -1; di <= 1; ++di) {
      const CellIndex n{cell->x + di, cell->y + dj};
      if ((di == 0 && dj == 0) || !field.reachable(n)) continue;
      const double step = std::hypot(di, dj) * f.resolution();
      const double v = f.at(n);
      if (v < best) {
        best = v;
        dir = Vec2(di, dj) / step;
      }
    }
  }
  if (dir.norm() < 1e-12) return std::nullopt;
  return dir.normalized();
}

ControlOutput compute_velocity_command(const GeodesicField& field, const Pose4& robot, const Vec2& goal,
                                       const sim::VelocityLimits& limits, const ControllerParams& params) {
  ControlOutput out;
  const Vec2 p = robot.t.head<2>();
  const double dist = (goal - p).norm();
  if (dist <= params.goal_tolerance) {
    out.signal = ControlSignal::GoalReached;
    return out;
  }
  const auto dir = descent_direction(field, p);
  if (!dir) {
    out.signal = ControlSignal::LocalMinimum;
    return out;
  }
  const double error = wrap_angle(std::atan2(dir->y(), dir->x()) - robot.yaw);
  const double speed_scale = std::max(0.0, std::cos(error)) * std::min(1.0, dist / params.slow_radius);
  out.command.vx = limits.vx_max * speed_scale;
  out.command.yaw_rate = std::clamp(params.heading_gain * error, -limits.yaw_rate_max, limits.yaw_rate_max);
  out.command = limits.clamp(out.command);
  return out;
}

Progress check_progress(const std::deque<ProgressSample>& history, const ProgressParams& params, bool goal_blocked) {
  if (goal_blocked) return Progress::Unreachable;
  if (history.empty()) return Progress::Reachable;
  const ProgressSample& now = history.back();
  if (now.t - history.front().t < params.window) return Progress::Reachable;
  // Latest sample at or before the window start.
  const ProgressSample* past = &history.front();
  for (const auto& s : history) {
    if (s.t > now.t - params.window) break;
    past = &s;
  }
  return past->distance - now.distance < params.min_progress ? Progress::Unreachable : Progress::Reachable;
}

}  // namespace sylva::autonomy
