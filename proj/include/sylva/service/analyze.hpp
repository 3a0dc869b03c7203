#pragma once

#include <filesystem>
#include <optional>

#include "sylva/analysis/inventory.hpp"
#include "sylva/common/parallel.hpp"
#include "sylva/common/point_cloud.hpp"

namespace sylva::service {

struct AnalyzeParams {
  analysis::InventoryParams inventory;
  double viewpoint_spacing = 5.0;  // m; synthetic viewpoint grid over the cloud footprint
  double viewpoint_height = 1.0;   // m above the lowest point
  ExecPolicy policy = ExecPolicy::Parallel;
};

void to_json(Json& j, const AnalyzeParams& p);
void from_json(const Json& j, AnalyzeParams& p);

struct AnalyzeResult {
  analysis::ForestInventory inventory;
  analysis::PayloadAnalysis analysis;
};

/// Runs the whole cloud (map frame) through the forest pipeline as one
/// payload. Throws analysis::DegenerateTerrain on an empty cloud or when
/// no ground can be found.
AnalyzeResult analyze_cloud(const PointCloud& cloud, const AnalyzeParams& params = {});

/// Reads a PLY (PlyError with byte offset when malformed), analyzes it and,
/// with an output directory, writes inventory.json and the marteloscope files.
AnalyzeResult analyze_ply(const std::filesystem::path& ply, const AnalyzeParams& params = {},
                          const std::optional<std::filesystem::path>& output_dir = std::nullopt);

}  // namespace sylva::service
