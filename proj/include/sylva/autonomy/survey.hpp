#pragma once

#include <string>
#include <vector>

#include "sylva/common/error.hpp"
#include "sylva/common/geometry.hpp"
#include "sylva/common/json.hpp"

namespace sylva::autonomy {

using Polygon = std::vector<Vec2>;

enum class WaypointStatus { Pending, Reached, Skipped };

std::string to_string(WaypointStatus s);
WaypointStatus waypoint_status_from_string(const std::string& s);

class SurveyError : public Error {
 public:
  using Error::Error;
};

double polygon_area(const Polygon& polygon);
bool is_simple(const Polygon& polygon);
/// Point-in-polygon with a boundary tolerance.
bool polygon_contains(const Polygon& polygon, const Vec2& p, double tolerance = 1e-6);

struct SurveyPlan {
  Polygon polygon;
  double row_spacing = 10.0;
  double waypoint_spacing = 10.0;
  double sweep_heading = 0.0;
  std::vector<Pose6> waypoints;
  std::vector<WaypointStatus> status;
  std::vector<int> row;  // row index per waypoint, -1 for row transitions
  std::vector<std::string> warnings;

  std::size_t size() const { return waypoints.size(); }
  std::size_t row_count() const;
};

void to_json(Json& j, const SurveyPlan& plan);
void from_json(const Json& j, SurveyPlan& plan);

struct SurveyOptions {
  double loop_radius_min = 10.0;  // rows further apart than 1.5x this cannot close loops
};

/// Boustrophedon plan. Rows run along `sweep_heading`, are centered across
/// the polygon and alternate direction; waypoints are equally spaced along
/// each row. Throws SurveyError on a degenerate polygon or a row spacing
/// that would starve loop closure.
SurveyPlan plan_survey(const Polygon& polygon, double row_spacing, double waypoint_spacing, double sweep_heading,
                       const SurveyOptions& options = {});

}  // namespace sylva::autonomy
