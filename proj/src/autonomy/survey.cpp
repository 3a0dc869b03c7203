#include "sylva/autonomy/survey.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sylva::autonomy {

std::string to_string(WaypointStatus s) {
  switch (s) {
    case WaypointStatus::Pending: return "pending";
    case WaypointStatus::Reached: return "reached";
    case WaypointStatus::Skipped: return "skipped";
  }
  return "pending";
}

WaypointStatus waypoint_status_from_string(const std::string& s) {
  if (s == "pending") return WaypointStatus::Pending;
  if (s == "reached") return WaypointStatus::Reached;
  if (s == "skipped") return WaypointStatus::Skipped;
  throw ConfigError("unknown waypoint status '" + s + "'");
}

double polygon_area(const Polygon& polygon) {
  double a = 0.0;
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    const Vec2& p = polygon[i];
    const Vec2& q = polygon[(i + 1) % polygon.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const double d1 = cross(b - a, c - a);
  const double d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c);
  const double d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

}  // namespace

bool is_simple(const Polygon& polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(polygon[i], polygon[(i + 1) % n], polygon[j], polygon[(j + 1) % n])) return false;
    }
  }
  return true;
}

bool polygon_contains(const Polygon& polygon, const Vec2& p, double tolerance) {
  bool inside = false;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if (segment_distance(p, a, b) <= tolerance) return true;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

std::size_t SurveyPlan::row_count() const {
  int m = -1;
  for (int r : row) m = std::max(m, r);
  return static_cast<std::size_t>(m + 1);
}

void to_json(Json& j, const SurveyPlan& plan) {
  Json poly = Json::array();
  for (const auto& v : plan.polygon) poly.push_back(to_json_value(v));
  Json wps = Json::array();
  for (std::size_t i = 0; i < plan.waypoints.size(); ++i) {
    wps.push_back({{"pose", plan.waypoints[i]}, {"status", to_string(plan.status[i])}, {"row", plan.row[i]}});
  }
  j = Json{{"polygon", poly},
           {"row_spacing", plan.row_spacing},
           {"waypoint_spacing", plan.waypoint_spacing},
           {"sweep_heading", plan.sweep_heading},
           {"waypoints", wps},
           {"warnings", plan.warnings}};
}

void from_json(const Json& j, SurveyPlan& plan) {
  plan = SurveyPlan{};
  for (const auto& v : j.at("polygon")) plan.polygon.push_back(vec2_from_json(v));
  plan.row_spacing = j.at("row_spacing").get<double>();
  plan.waypoint_spacing = j.at("waypoint_spacing").get<double>();
  plan.sweep_heading = j.at("sweep_heading").get<double>();
  for (const auto& w : j.at("waypoints")) {
    plan.waypoints.push_back(w.at("pose").get<Pose6>());
    plan.status.push_back(waypoint_status_from_string(w.at("status").get<std::string>()));
    plan.row.push_back(w.at("row").get<int>());
  }
  plan.warnings = j.value("warnings", std::vector<std::string>{});
}

SurveyPlan plan_survey(const Polygon& polygon, double row_spacing, double waypoint_spacing, double sweep_heading,
                       const SurveyOptions& options) {
  if (polygon.size() < 3 || !is_simple(polygon) || std::abs(polygon_area(polygon)) < 1e-9) {
    throw SurveyError("survey polygon is degenerate");
  }
  if (!(row_spacing > 0.0) || !(waypoint_spacing > 0.0)) {
    throw SurveyError("survey spacings must be positive");
  }
  if (row_spacing > 1.5 * options.loop_radius_min) {
    throw SurveyError("row spacing exceeds 1.5x the loop closure radius");
  }
  SurveyPlan plan;
  plan.polygon = polygon;
  plan.row_spacing = row_spacing;
  plan.waypoint_spacing = waypoint_spacing;
  plan.sweep_heading = sweep_heading;

  // Work in a frame whose x axis is the sweep direction.
  const Eigen::Matrix2d to_sweep = rot2(-sweep_heading);
  const Eigen::Matrix2d to_world = rot2(sweep_heading);
  Polygon local;
  for (const auto& v : polygon) local.push_back(to_sweep * v);
  double ymin = local[0].y();
  double ymax = local[0].y();
  for (const auto& v : local) {
    ymin = std::min(ymin, v.y());
    ymax = std::max(ymax, v.y());
  }
  const double width = ymax - ymin;
  int rows = static_cast<int>(std::floor(width / row_spacing)) + 1;
  if (width <= row_spacing) {
    rows = 1;
    if (width < row_spacing) {
      plan.warnings.push_back("row spacing exceeds the polygon width; using a single row");
    }
  }
  const double first = ymin + 0.5 * (width - (rows - 1) * row_spacing);
  const double eps = 1e-7 * std::max(1.0, width);

  auto push = [&](const Vec2& local_point, double local_heading, int row) {
    Pose6 wp;
    const Vec2 w = to_world * local_point;
    wp.t = {w.x(), w.y(), 0.0};
    wp.yaw = wrap_angle(local_heading + sweep_heading);
    plan.waypoints.push_back(wp);
    plan.status.push_back(WaypointStatus::Pending);
    plan.row.push_back(row);
  };

  Vec2 last_local;
  bool have_last = false;
  for (int r = 0; r < rows; ++r) {
    const double y = std::clamp(first + r * row_spacing, ymin + eps, ymax - eps);
    std::vector<double> xs;
    for (std::size_t i = 0; i < local.size(); ++i) {
      const Vec2& a = local[i];
      const Vec2& b = local[(i + 1) % local.size()];
      if ((a.y() > y) != (b.y() > y)) {
        xs.push_back(a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
      }
    }
    std::sort(xs.begin(), xs.end());
    const bool forward = r % 2 == 0;
    std::vector<std::pair<double, double>> spans;
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) spans.emplace_back(xs[k], xs[k + 1]);
    if (!forward) std::reverse(spans.begin(), spans.end());
    const double heading = forward ? 0.0 : std::numbers::pi;
    for (auto [x0, x1] : spans) {
      if (!forward) std::swap(x0, x1);
      const double len = std::abs(x1 - x0);
      const int n = len < 1e-9 ? 1 : static_cast<int>(std::ceil(len / waypoint_spacing - 1e-9)) + 1;
      const Vec2 start(x0, y);
      if (have_last) {
        const Vec2 gap = start - last_local;
        const int extra = static_cast<int>(std::ceil(gap.norm() / waypoint_spacing - 1e-9)) - 1;
        const double h = std::atan2(gap.y(), gap.x());
        for (int k = 1; k <= extra; ++k) {
          const Vec2 p = last_local + gap * (static_cast<double>(k) / (extra + 1));
          if (polygon_contains(local, p)) push(p, h, -1);
        }
      }
      for (int k = 0; k < n; ++k) {
        const double s = n == 1 ? 0.0 : static_cast<double>(k) / (n - 1);
        push(Vec2(x0 + s * (x1 - x0), y), heading, r);
      }
      last_local = Vec2(x1, y);
      have_last = true;
    }
  }
  if (plan.waypoints.empty()) {
    throw SurveyError("survey polygon produced no waypoints");
  }
  return plan;
}

}  // namespace sylva::autonomy
