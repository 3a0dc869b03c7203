#pragma once

#include <optional>
#include <vector>

#include "sylva/analysis/fitting.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/point_cloud.hpp"

namespace sylva::analysis {

class ReconstructionFailed : public Error {
 public:
  using Error::Error;
};

struct StemParams {
  double band_height = 0.5;
  std::size_t min_band_points = 10;
  double rms_gate = 0.05;
  double low_coverage_deg = 180.0;
  double breast_height = 1.3;
};

void to_json(Json& j, const StemParams& p);
void from_json(const Json& j, StemParams& p);

struct StemCircle {
  double height = 0.0;  // normalized band center, m
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  double rms = 0.0;
  double arc_deg = 0.0;
  bool low_coverage = false;
};

/// Circles per horizontal band of the normalized stem. `heights` holds the
/// normalized height of every point. Throws ReconstructionFailed below two
/// valid bands.
std::vector<StemCircle> fit_circles_along_stem(const std::vector<Vec3>& points, const std::vector<double>& heights,
                                               const StemParams& params = {});

struct Frustum {
  double z0 = 0.0;
  double z1 = 0.0;
  Vec2 c0 = Vec2::Zero();
  Vec2 c1 = Vec2::Zero();
  double r0 = 0.0;
  double r1 = 0.0;

  double volume() const;
};

std::vector<Frustum> reconstruct_frustums(const std::vector<StemCircle>& circles);
double stem_volume(const std::vector<Frustum>& frustums);

struct Traits {
  std::optional<double> dbh;
  bool dbh_extrapolated = false;
  double height = 0.0;
  bool fov_limited = false;
};

/// Diameter at `breast_height` from the circle stack; absent when breast
/// height lies more than one band outside the stack.
std::optional<double> diameter_at_breast_height(const std::vector<StemCircle>& circles, const StemParams& params,
                                                bool* extrapolated = nullptr);

struct Visibility {
  double upper_elevation = 0.9076;  // rad
  double range = 15.0;              // m
};

/// Highest absolute z the sensor could observe above `position` from any of
/// the viewpoints.
double visibility_ceiling(const Vec2& position, const std::vector<Vec3>& viewpoints, const Visibility& visibility);

/// DBH from the circle stack, height as the highest normalized point, and
/// an FOV flag when the top of the cloud reaches the visibility ceiling.
Traits estimate_traits(const std::vector<StemCircle>& circles, const std::vector<double>& heights, double ground_z,
                       const Vec2& position, const std::vector<Vec3>& viewpoints, const StemParams& params,
                       const Visibility& visibility);

}  // namespace sylva::analysis
