#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sylva/common/error.hpp"
#include "sylva/common/geometry.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/parallel.hpp"

namespace sylva::metrics {

enum class InterventionCause { Push, DeadEnd, Trapped, Safety };

std::string to_string(InterventionCause cause);
InterventionCause intervention_cause_from_string(const std::string& s);

struct InterventionRecord {
  double start = 0.0;  // s
  double end = 0.0;
  Pose4 start_pose;
  Pose4 end_pose;
  InterventionCause cause = InterventionCause::Push;

  double duration() const { return end - start; }
  bool operator==(const InterventionRecord&) const = default;
};

void to_json(Json& j, const InterventionRecord& r);
void from_json(const Json& j, InterventionRecord& r);

struct TrajectorySample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
};

struct AutonomySegment {
  double start = 0.0;
  double end = 0.0;
  double distance = 0.0;

  double duration() const { return end - start; }
  bool operator==(const AutonomySegment&) const = default;
};

void to_json(Json& j, const AutonomySegment& s);
void from_json(const Json& j, AutonomySegment& s);

/// Arc length of the piecewise-linear trajectory between t0 and t1.
double arc_length(const std::vector<TrajectorySample>& trajectory, double t0, double t1);

/// Maximal intervals of [mission_start, mission_end] outside interventions,
/// with the autonomous distance walked in each. Zero-length intervals are
/// dropped. Throws Error on unsorted or overlapping records.
std::vector<AutonomySegment> compute_segments(const std::vector<TrajectorySample>& trajectory,
                                              const std::vector<InterventionRecord>& interventions,
                                              double mission_start, double mission_end);

struct BetweenInterventions {
  double mdbi = 0.0;  // m
  double mtbi = 0.0;  // s
};

std::optional<BetweenInterventions> compute_mdbi_mtbi(const std::vector<AutonomySegment>& segments);

struct CoverageParams {
  double effective_range = 15.0;
  double resolution = 0.25;
  std::optional<Rect> clip;
};

/// Area of the union of range disks around the samples, in hectares. The
/// raster is aligned to multiples of the resolution so adding samples or
/// widening the range never removes a cell.
double compute_covered_area(const std::vector<Vec2>& samples, const CoverageParams& params,
                            ExecPolicy policy = ExecPolicy::Parallel);

struct MissionRecord {
  double start = 0.0;
  double end = 0.0;
  bool completed = false;
  std::vector<TrajectorySample> trajectory;
  std::vector<InterventionRecord> interventions;
};

struct MissionReport {
  double mission_time = 0.0;      // s
  double distance = 0.0;          // m
  double area_ha = 0.0;
  int interventions = 0;
  std::optional<double> mdbi;     // m
  std::optional<double> mtbi;     // s
  std::vector<AutonomySegment> segments;
  std::vector<double> intervention_durations;
  int tree_count = 0;
  bool completed = false;
  double coverage_rate = 0.0;     // ha per hour
  std::map<std::string, std::string> exports;
  Json evaluation = Json::object();

  bool operator==(const MissionReport&) const = default;
};

void to_json(Json& j, const MissionReport& r);
void from_json(const Json& j, MissionReport& r);

MissionReport build_report(const MissionRecord& record, int tree_count, const CoverageParams& coverage,
                           ExecPolicy policy = ExecPolicy::Parallel);

/// Table-style plain text summary.
std::string report_text(const MissionReport& report);
std::string segments_csv(const std::vector<AutonomySegment>& segments);
std::string interventions_csv(const std::vector<InterventionRecord>& interventions);

}  // namespace sylva::metrics
