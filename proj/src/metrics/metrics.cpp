#include "sylva/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "sylva/common/grid.hpp"

namespace sylva::metrics {

std::string to_string(InterventionCause cause) {
  switch (cause) {
    case InterventionCause::Push: return "push";
    case InterventionCause::DeadEnd: return "dead-end";
    case InterventionCause::Trapped: return "trapped";
    case InterventionCause::Safety: return "safety";
  }
  return "push";
}

InterventionCause intervention_cause_from_string(const std::string& s) {
  if (s == "push") return InterventionCause::Push;
  if (s == "dead-end") return InterventionCause::DeadEnd;
  if (s == "trapped") return InterventionCause::Trapped;
  if (s == "safety") return InterventionCause::Safety;
  throw ConfigError("unknown intervention cause '" + s + "'");
}

void to_json(Json& j, const InterventionRecord& r) {
  j = Json{{"start", r.start},
           {"end", r.end},
           {"start_pose", r.start_pose},
           {"end_pose", r.end_pose},
           {"cause", to_string(r.cause)}};
}

void from_json(const Json& j, InterventionRecord& r) {
  r.start = j.at("start").get<double>();
  r.end = j.at("end").get<double>();
  r.start_pose = j.at("start_pose").get<Pose4>();
  r.end_pose = j.at("end_pose").get<Pose4>();
  r.cause = intervention_cause_from_string(j.at("cause").get<std::string>());
}

void to_json(Json& j, const AutonomySegment& s) {
  j = Json{{"start", s.start}, {"end", s.end}, {"distance", s.distance}};
}

void from_json(const Json& j, AutonomySegment& s) {
  s.start = j.at("start").get<double>();
  s.end = j.at("end").get<double>();
  s.distance = j.at("distance").get<double>();
}

namespace {

Vec3 position_at(const std::vector<TrajectorySample>& tr, std::size_t i, double t) {
  const TrajectorySample& a = tr[i];
  const TrajectorySample& b = tr[i + 1];
  if (b.t <= a.t) return b.position;
  const double u = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
  return a.position + u * (b.position - a.position);
}

}  // namespace

double arc_length(const std::vector<TrajectorySample>& tr, double t0, double t1) {
  if (tr.size() < 2 || !(t1 > t0)) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < tr.size(); ++i) {
    const double a = std::max(tr[i].t, t0);
    const double b = std::min(tr[i + 1].t, t1);
    if (b < a || (b == a && tr[i + 1].t > tr[i].t)) continue;
    if (tr[i + 1].t == tr[i].t) {
      // Instantaneous jump: counted when it falls strictly inside the window.
      if (tr[i].t > t0 && tr[i].t < t1) total += (tr[i + 1].position - tr[i].position).norm();
      continue;
    }
    total += (position_at(tr, i, b) - position_at(tr, i, a)).norm();
  }
  return total;
}

std::vector<AutonomySegment> compute_segments(const std::vector<TrajectorySample>& trajectory,
                                              const std::vector<InterventionRecord>& interventions,
                                              double mission_start, double mission_end) {
  double cursor = mission_start;
  std::vector<AutonomySegment> out;
  for (const InterventionRecord& r : interventions) {
    if (r.end < r.start) throw Error("intervention ends before it starts");
    if (r.start < cursor) throw Error("interventions overlap or are not time-ordered");
    if (r.end > mission_end) throw Error("intervention extends past the mission end");
    if (r.start > cursor) out.push_back({cursor, r.start, arc_length(trajectory, cursor, r.start)});
    cursor = r.end;
  }
  if (mission_end > cursor) out.push_back({cursor, mission_end, arc_length(trajectory, cursor, mission_end)});
  return out;
}

std::optional<BetweenInterventions> compute_mdbi_mtbi(const std::vector<AutonomySegment>& segments) {
  if (segments.empty()) return std::nullopt;
  std::vector<double> d;
  std::vector<double> t;
  for (const AutonomySegment& s : segments) {
    d.push_back(s.distance);
    t.push_back(s.duration());
  }
  // Sorted summation keeps the means permutation-invariant bit for bit.
  std::sort(d.begin(), d.end());
  std::sort(t.begin(), t.end());
  const double n = static_cast<double>(segments.size());
  return BetweenInterventions{std::accumulate(d.begin(), d.end(), 0.0) / n,
                              std::accumulate(t.begin(), t.end(), 0.0) / n};
}

double compute_covered_area(const std::vector<Vec2>& samples, const CoverageParams& params, ExecPolicy policy) {
  if (!(params.effective_range > 0.0) || !(params.resolution > 0.0)) {
    throw ConfigError("coverage range and resolution must be positive");
  }
  if (samples.empty()) return 0.0;
  const double res = params.resolution;
  const double range = params.effective_range;
  double min_x = samples.front().x(), max_x = min_x, min_y = samples.front().y(), max_y = min_y;
  for (const Vec2& s : samples) {
    min_x = std::min(min_x, s.x());
    max_x = std::max(max_x, s.x());
    min_y = std::min(min_y, s.y());
    max_y = std::max(max_y, s.y());
  }
  const long i0 = static_cast<long>(std::floor((min_x - range) / res)) - 1;
  const long j0 = static_cast<long>(std::floor((min_y - range) / res)) - 1;
  const long nx = static_cast<long>(std::floor((max_x + range) / res)) + 2 - i0;
  const long ny = static_cast<long>(std::floor((max_y + range) / res)) + 2 - j0;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return samples[a].y() < samples[b].y(); });
  std::vector<double> ys(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) ys[k] = samples[order[k]].y();

  std::vector<long> counts(static_cast<std::size_t>(ny), 0);
  const double r2 = range * range;
  for_each_index(policy, ny, [&](std::ptrdiff_t row) {
    const double cy = (static_cast<double>(j0 + row) + 0.5) * res;
    if (params.clip && (cy < params.clip->min_y || cy > params.clip->max_y)) return;
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(nx), 0);
    const auto lo = std::lower_bound(ys.begin(), ys.end(), cy - range) - ys.begin();
    const auto hi = std::upper_bound(ys.begin(), ys.end(), cy + range) - ys.begin();
    for (auto k = lo; k < hi; ++k) {
      const Vec2& s = samples[order[static_cast<std::size_t>(k)]];
      const double dy = cy - s.y();
      const double half = std::sqrt(std::max(0.0, r2 - dy * dy));
      // Cells whose center lies within [s.x - half, s.x + half].
      const long a = static_cast<long>(std::ceil((s.x() - half) / res - 0.5)) - i0;
      const long b = static_cast<long>(std::floor((s.x() + half) / res - 0.5)) - i0;
      for (long i = std::max(a, 0L); i <= std::min(b, nx - 1); ++i) covered[static_cast<std::size_t>(i)] = 1;
    }
    long n = 0;
    for (long i = 0; i < nx; ++i) {
      if (!covered[static_cast<std::size_t>(i)]) continue;
      if (params.clip) {
        const double cx = (static_cast<double>(i0 + i) + 0.5) * res;
        if (cx < params.clip->min_x || cx > params.clip->max_x) continue;
      }
      ++n;
    }
    counts[static_cast<std::size_t>(row)] = n;
  });
  const long total = std::accumulate(counts.begin(), counts.end(), 0L);
  return static_cast<double>(total) * res * res / 10000.0;
}

void to_json(Json& j, const MissionReport& r) {
  j = Json{{"mission_time", r.mission_time},
           {"distance", r.distance},
           {"area_ha", r.area_ha},
           {"interventions", r.interventions},
           {"mdbi", r.mdbi ? Json(*r.mdbi) : Json(nullptr)},
           {"mtbi", r.mtbi ? Json(*r.mtbi) : Json(nullptr)},
           {"segments", r.segments},
           {"intervention_durations", r.intervention_durations},
           {"tree_count", r.tree_count},
           {"completed", r.completed},
           {"coverage_rate", r.coverage_rate},
           {"exports", r.exports},
           {"evaluation", r.evaluation}};
}

void from_json(const Json& j, MissionReport& r) {
  r.mission_time = j.at("mission_time").get<double>();
  r.distance = j.at("distance").get<double>();
  r.area_ha = j.at("area_ha").get<double>();
  r.interventions = j.at("interventions").get<int>();
  r.mdbi = j.at("mdbi").is_null() ? std::nullopt : std::optional<double>(j.at("mdbi").get<double>());
  r.mtbi = j.at("mtbi").is_null() ? std::nullopt : std::optional<double>(j.at("mtbi").get<double>());
  r.segments = j.at("segments").get<std::vector<AutonomySegment>>();
  r.intervention_durations = j.at("intervention_durations").get<std::vector<double>>();
  r.tree_count = j.at("tree_count").get<int>();
  r.completed = j.at("completed").get<bool>();
  r.coverage_rate = j.at("coverage_rate").get<double>();
  r.exports = j.at("exports").get<std::map<std::string, std::string>>();
  r.evaluation = value_or(j, "evaluation", Json::object());
}

MissionReport build_report(const MissionRecord& record, int tree_count, const CoverageParams& coverage,
                           ExecPolicy policy) {
  MissionReport r;
  r.completed = record.completed;
  r.tree_count = tree_count;
  r.mission_time = std::max(0.0, record.end - record.start);
  r.interventions = static_cast<int>(record.interventions.size());
  for (const auto& i : record.interventions) r.intervention_durations.push_back(i.duration());
  if (record.trajectory.empty()) return r;
  // Total distance includes displacement applied during interventions.
  for (std::size_t i = 0; i + 1 < record.trajectory.size(); ++i) {
    const auto& a = record.trajectory[i];
    const auto& b = record.trajectory[i + 1];
    if (a.t >= record.start && b.t <= record.end) r.distance += (b.position - a.position).norm();
  }
  r.segments = compute_segments(record.trajectory, record.interventions, record.start, record.end);
  if (const auto m = compute_mdbi_mtbi(r.segments)) {
    r.mdbi = m->mdbi;
    r.mtbi = m->mtbi;
  }
  std::vector<Vec2> samples;
  samples.reserve(record.trajectory.size());
  for (const auto& s : record.trajectory) samples.push_back(s.position.head<2>());
  r.area_ha = compute_covered_area(samples, coverage, policy);
  if (r.mission_time > 0.0) r.coverage_rate = r.area_ha / (r.mission_time / 3600.0);
  return r;
}

std::string report_text(const MissionReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.1f}", *v) : std::string("-"); };
  std::string out;
  out += fmt::format("{:>12} {:>12} {:>10} {:>6} {:>10} {:>10} {:>6} {:>10}\n", "time [s]", "distance [m]", "area [ha]",
                     "#int", "MDBI [m]", "MTBI [s]", "trees", "ha/h");
  out += fmt::format("{:>12.1f} {:>12.1f} {:>10.2f} {:>6} {:>10} {:>10} {:>6} {:>10.2f}\n", r.mission_time, r.distance,
                     r.area_ha, r.interventions, opt(r.mdbi), opt(r.mtbi), r.tree_count, r.coverage_rate);
  out += fmt::format("completed: {}  segments: {}\n", r.completed ? "yes" : "no", r.segments.size());
  return out;
}

std::string segments_csv(const std::vector<AutonomySegment>& segments) {
  std::string out = "start,end,duration,distance\n";
  for (const auto& s : segments) out += fmt::format("{},{},{},{}\n", s.start, s.end, s.duration(), s.distance);
  return out;
}

std::string interventions_csv(const std::vector<InterventionRecord>& interventions) {
  std::string out = "start,end,duration,cause,start_x,start_y,end_x,end_y\n";
  for (const auto& r : interventions) {
    out += fmt::format("{},{},{},{},{},{},{},{}\n", r.start, r.end, r.duration(), to_string(r.cause), r.start_pose.t.x(),
                       r.start_pose.t.y(), r.end_pose.t.x(), r.end_pose.t.y());
  }
  return out;
}

}  // namespace sylva::metrics
