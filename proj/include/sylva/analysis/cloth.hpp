#pragma once

#include <cstdint>
#include <vector>

#include "sylva/analysis/terrain_model.hpp"
#include "sylva/common/error.hpp"
#include "sylva/common/json.hpp"
#include "sylva/common/parallel.hpp"
#include "sylva/common/point_cloud.hpp"

namespace sylva::analysis {

class DegenerateTerrain : public Error {
 public:
  using Error::Error;
};

struct ClothParams {
  double resolution = 0.5;      // particle spacing, m
  int rigidness = 3;            // spring relaxation passes per iteration
  double gravity_step = 0.05;   // m per iteration
  int max_iterations = 1000;
  double convergence = 0.005;   // m
  double class_threshold = 0.1; // m
  double snap_radius = 0.125;   // collision search radius around a particle, m

  void validate() const;
};

void to_json(Json& j, const ClothParams& p);
void from_json(const Json& j, ClothParams& p);

struct ClothResult {
  TerrainModel terrain;
  std::vector<std::uint8_t> ground;  // one flag per input point
  int iterations = 0;
  bool converged = false;

  std::size_t ground_count() const;
};

/// Cloth simulation ground filter. The particle update is Jacobi-style so
/// the parallel path is bitwise identical to the serial one.
ClothResult fit_terrain_cloth(const PointCloud& cloud, const ClothParams& params = {},
                              ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace sylva::analysis
