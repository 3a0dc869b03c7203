#include "sylva/service/analyze.hpp"

#include <cmath>

#include "sylva/analysis/marteloscope.hpp"
#include "sylva/common/ply.hpp"

namespace sylva::service {

void to_json(Json& j, const AnalyzeParams& p) {
  j = {{"inventory", p.inventory},
       {"viewpoint_spacing", p.viewpoint_spacing},
       {"viewpoint_height", p.viewpoint_height}};
}

void from_json(const Json& j, AnalyzeParams& p) {
  const AnalyzeParams d;
  if (j.contains("inventory")) p.inventory = j.at("inventory").get<analysis::InventoryParams>();
  p.viewpoint_spacing = value_or(j, "viewpoint_spacing", d.viewpoint_spacing);
  p.viewpoint_height = value_or(j, "viewpoint_height", d.viewpoint_height);
  if (!(p.viewpoint_spacing > 0.0)) throw ConfigError("viewpoint_spacing must be positive");
}

AnalyzeResult analyze_cloud(const PointCloud& cloud, const AnalyzeParams& params) {
  if (cloud.empty()) throw analysis::DegenerateTerrain("analyze: empty cloud");
  Vec3 lo = cloud.points.front();
  Vec3 hi = lo;
  for (const Vec3& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  estimation::DataPayload payload;
  payload.cloud = cloud;
  const double s = params.viewpoint_spacing;
  const int nx = static_cast<int>(std::ceil((hi.x() - lo.x()) / s));
  const int ny = static_cast<int>(std::ceil((hi.y() - lo.y()) / s));
  for (int y = 0; y <= ny; ++y) {
    for (int x = 0; x <= nx; ++x) {
      payload.viewpoints.emplace_back(lo.x() + x * s, lo.y() + y * s, lo.z() + params.viewpoint_height);
    }
  }
  AnalyzeResult out{analysis::ForestInventory(params.inventory), {}};
  out.analysis = analysis::process_payload(out.inventory, payload, params.policy);
  if (out.analysis.degenerate) throw analysis::DegenerateTerrain("analyze: no ground found in the cloud");
  return out;
}

AnalyzeResult analyze_ply(const std::filesystem::path& ply, const AnalyzeParams& params,
                          const std::optional<std::filesystem::path>& output_dir) {
  AnalyzeResult out = analyze_cloud(read_ply(ply), params);
  if (output_dir) {
    std::filesystem::create_directories(*output_dir);
    write_json_file(*output_dir / "inventory.json", analysis::inventory_json(out.inventory));
    analysis::export_marteloscope(out.inventory, *output_dir);
  }
  return out;
}

}  // namespace sylva::service
