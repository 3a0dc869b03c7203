#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sylva/common/random.hpp"
#include "sylva/metrics/metrics.hpp"

using namespace sylva;
using namespace sylva::metrics;

namespace {

std::vector<TrajectorySample> straight(double length, double duration, int n) {
  std::vector<TrajectorySample> out;
  for (int i = 0; i <= n; ++i) {
    const double u = static_cast<double>(i) / n;
    out.push_back({u * duration, Vec3(u * length, 0.0, 0.0)});
  }
  return out;
}

InterventionRecord record(double a, double b) {
  InterventionRecord r;
  r.start = a;
  r.end = b;
  return r;
}

double brute_force_area(const std::vector<Vec2>& samples, double range, double res) {
  double min_x = 1e18, min_y = 1e18, max_x = -1e18, max_y = -1e18;
  for (const auto& s : samples) {
    min_x = std::min(min_x, s.x());
    min_y = std::min(min_y, s.y());
    max_x = std::max(max_x, s.x());
    max_y = std::max(max_y, s.y());
  }
  long count = 0;
  const long i0 = static_cast<long>(std::floor((min_x - range) / res)) - 2;
  const long i1 = static_cast<long>(std::floor((max_x + range) / res)) + 2;
  const long j0 = static_cast<long>(std::floor((min_y - range) / res)) - 2;
  const long j1 = static_cast<long>(std::floor((max_y + range) / res)) + 2;
  for (long j = j0; j <= j1; ++j) {
    for (long i = i0; i <= i1; ++i) {
      const Vec2 c((i + 0.5) * res, (j + 0.5) * res);
      for (const auto& s : samples) {
        const double dy = c.y() - s.y();
        const double half = std::sqrt(std::max(0.0, range * range - dy * dy));
        if (std::abs(dy) <= range && c.x() >= s.x() - half && c.x() <= s.x() + half) {
          ++count;
          break;
        }
      }
    }
  }
  return count * res * res / 10000.0;
}

}  // namespace

TEST_CASE("zero interventions: MDBI is the distance and MTBI the mission time") {
  const auto tr = straight(233.6, 432.4, 4324);
  const auto segs = compute_segments(tr, {}, 0.0, 432.4);
  REQUIRE(segs.size() == 1);
  const auto m = compute_mdbi_mtbi(segs);
  REQUIRE(m);
  CHECK(m->mdbi == doctest::Approx(233.6).epsilon(1e-12));
  CHECK(m->mtbi == 432.4);
}

TEST_CASE("intervention walking is excluded from segments") {
  const auto tr = straight(100.0, 100.0, 1000);
  const auto segs = compute_segments(tr, {record(40.0, 60.0)}, 0.0, 100.0);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].distance == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(segs[1].distance == doctest::Approx(40.0).epsilon(1e-12));
  CHECK(segs[0].duration() == 40.0);
}

TEST_CASE("intervention covering the whole mission") {
  const auto tr = straight(10.0, 10.0, 10);
  const auto segs = compute_segments(tr, {record(0.0, 10.0)}, 0.0, 10.0);
  CHECK(segs.empty());
  CHECK_FALSE(compute_mdbi_mtbi(segs));
}

TEST_CASE("MDBI and MTBI are means") {
  const std::vector<AutonomySegment> s{{0, 200, 100}, {300, 400, 50}};
  const auto m = compute_mdbi_mtbi(s);
  REQUIRE(m);
  CHECK(m->mdbi == 75.0);
  CHECK(m->mtbi == 150.0);
  CHECK(compute_mdbi_mtbi({{5, 17, 3.5}})->mdbi == 3.5);
}

TEST_CASE("three-intervention log matches hand computation") {
  // 1 m/s straight walk for 300 s; interventions [50,65], [120,150], [200,210].
  const auto tr = straight(300.0, 300.0, 3000);
  const auto segs = compute_segments(tr, {record(50, 65), record(120, 150), record(200, 210)}, 0.0, 300.0);
  REQUIRE(segs.size() == 4);
  // Segments 50, 55, 50, 90 s long at 1 m/s.
  const auto m = compute_mdbi_mtbi(segs);
  CHECK(m->mtbi == doctest::Approx(61.25));
  CHECK(m->mdbi == doctest::Approx(61.25));
}

TEST_CASE("malformed intervention logs are rejected") {
  const auto tr = straight(10.0, 10.0, 10);
  CHECK_THROWS_AS(compute_segments(tr, {record(2, 5), record(4, 6)}, 0.0, 10.0), Error);
  CHECK_THROWS_AS(compute_segments(tr, {record(5, 4)}, 0.0, 10.0), Error);
  CHECK_THROWS_AS(compute_segments(tr, {record(5, 12)}, 0.0, 10.0), Error);
}

TEST_CASE("conservation and permutation invariance over random logs") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const double end = 600.0;
    std::vector<double> cuts;
    const int k = static_cast<int>(rng() % 6);
    for (int i = 0; i < 2 * k; ++i) cuts.push_back(std::round(draw_uniform(rng, 0.0, end) * 10.0) / 10.0);
    std::sort(cuts.begin(), cuts.end());
    std::vector<InterventionRecord> log;
    for (int i = 0; i < k; ++i) log.push_back(record(cuts[2 * i], cuts[2 * i + 1]));
    const auto tr = straight(300.0, end, 600);
    const auto segs = compute_segments(tr, log, 0.0, end);
    double sum = 0.0;
    for (const auto& s : segs) sum += s.duration();
    for (const auto& r : log) sum += r.duration();
    CHECK(std::abs(sum - end) < 1e-9);
    auto shuffled = segs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto a = compute_mdbi_mtbi(segs);
    const auto b = compute_mdbi_mtbi(shuffled);
    CHECK(a.has_value() == b.has_value());
    if (a) {
      CHECK(a->mdbi == b->mdbi);
      CHECK(a->mtbi == b->mtbi);
    }
  }
}

TEST_CASE("covered area of a disk and a stadium") {
  const CoverageParams p;
  const double disk = compute_covered_area({Vec2(3.1, -2.7)}, p);
  CHECK(std::abs(disk - std::numbers::pi * 225.0 / 10000.0) / (std::numbers::pi * 225.0 / 10000.0) < 0.02);
  std::vector<Vec2> line;
  for (int i = 0; i <= 1000; ++i) line.emplace_back(i * 0.1, 0.0);
  const double stadium = compute_covered_area(line, p);
  const double expected = (2.0 * 15.0 * 100.0 + std::numbers::pi * 225.0) / 10000.0;
  CHECK(std::abs(stadium - expected) / expected < 0.02);
}

TEST_CASE("covered area kernel equals the brute-force raster") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 12; ++i) pts.emplace_back(draw_uniform(rng, -20, 20), draw_uniform(rng, -10, 10));
    CoverageParams p;
    p.effective_range = draw_uniform(rng, 2.0, 6.0);
    p.resolution = 0.25;
    const double serial = compute_covered_area(pts, p, ExecPolicy::Serial);
    const double parallel = compute_covered_area(pts, p, ExecPolicy::Parallel);
    CHECK(serial == parallel);
    CHECK(serial == doctest::Approx(brute_force_area(pts, p.effective_range, p.resolution)).epsilon(1e-12));
  }
}

TEST_CASE("covered area is monotone in trajectory length and range") {
  Rng rng(6);
  std::vector<Vec2> walk{Vec2(0, 0)};
  double prev = 0.0;
  for (int i = 0; i < 200; ++i) {
    walk.push_back(walk.back() + Vec2(draw_uniform(rng, -1, 1), draw_uniform(rng, -1, 1)));
    const double a = compute_covered_area(walk, {});
    CHECK(a >= prev);
    prev = a;
  }
  double last = 0.0;
  for (double r : {1.0, 2.5, 5.0, 10.0, 15.0}) {
    CoverageParams p;
    p.effective_range = r;
    const double a = compute_covered_area(walk, p);
    CHECK(a >= last);
    last = a;
  }
}

TEST_CASE("clip limits covered area to bounds") {
  CoverageParams p;
  p.clip = Rect{0, 0, 10, 10};
  const double a = compute_covered_area({Vec2(5, 5)}, p);
  CHECK(a == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("report for a zero-intervention mission and round trip") {
  MissionRecord rec;
  rec.start = 0.0;
  rec.end = 432.4;
  rec.completed = true;
  rec.trajectory = straight(233.6, 432.4, 4324);
  MissionReport r = build_report(rec, 17, {});
  CHECK(r.interventions == 0);
  REQUIRE(r.mdbi);
  CHECK(*r.mdbi == r.distance);
  CHECK(*r.mtbi == r.mission_time);
  CHECK(r.tree_count == 17);
  CHECK(r.coverage_rate > 0.0);
  r.exports["report"] = "report.json";
  const Json j = r;
  const MissionReport back = Json::parse(j.dump()).get<MissionReport>();
  CHECK(back == r);
  CHECK(report_text(r).find("MDBI") != std::string::npos);
}

TEST_CASE("empty mission gives a zeroed report") {
  const MissionReport r = build_report(MissionRecord{}, 0, {});
  CHECK(r.mission_time == 0.0);
  CHECK(r.distance == 0.0);
  CHECK(r.area_ha == 0.0);
  CHECK_FALSE(r.mdbi);
  CHECK(r.segments.empty());
}

TEST_CASE("push displacement counts toward distance but not segments") {
  MissionRecord rec;
  rec.end = 30.0;
  rec.trajectory = {{0.0, Vec3(0, 0, 0)}, {10.0, Vec3(5, 0, 0)}, {15.0, Vec3(5, 0, 0)},
                    {15.0, Vec3(7, 0, 0)}, {20.0, Vec3(7, 0, 0)}, {30.0, Vec3(12, 0, 0)}};
  InterventionRecord push = record(10.0, 20.0);
  push.cause = InterventionCause::Trapped;
  rec.interventions = {push};
  const MissionReport r = build_report(rec, 0, {});
  CHECK(r.distance == doctest::Approx(12.0));
  REQUIRE(r.segments.size() == 2);
  CHECK(r.segments[0].distance + r.segments[1].distance == doctest::Approx(10.0));
  CHECK(r.intervention_durations == std::vector<double>{10.0});
  CHECK(interventions_csv(rec.interventions).find("trapped") != std::string::npos);
}
