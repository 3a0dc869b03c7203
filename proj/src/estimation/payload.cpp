#include "sylva/estimation/payload.hpp"

#include <string>

#include "sylva/common/error.hpp"
#include "sylva/common/ply.hpp"

namespace sylva::estimation {

void to_json(Json& j, const PayloadParams& p) {
  j = Json{{"travel_threshold", p.travel_threshold}, {"voxel_leaf", p.voxel_leaf}, {"crop_range", p.crop_range}};
}

void from_json(const Json& j, PayloadParams& p) {
  p = PayloadParams{};
  p.travel_threshold = value_or(j, "travel_threshold", p.travel_threshold);
  p.voxel_leaf = value_or(j, "voxel_leaf", p.voxel_leaf);
  p.crop_range = value_or(j, "crop_range", p.crop_range);
  if (!(p.travel_threshold > 0.0) || !(p.voxel_leaf > 0.0) || !(p.crop_range > 0.0)) {
    throw ConfigError("payload parameters must be positive");
  }
}

std::optional<DataPayload> accumulate_payload(const std::vector<TaggedScan>& scans, const Pose4& anchor_odom,
                                              double travel, const PayloadParams& params) {
  if (travel < params.travel_threshold || scans.empty()) {
    return std::nullopt;
  }
  const Pose4 to_anchor = anchor_odom.inverse();
  const double crop2 = params.crop_range * params.crop_range;
  DataPayload out;
  bool labelled = true;
  for (const auto& s : scans) labelled = labelled && s.cloud.has_labels();
  for (const auto& s : scans) {
    const Pose4 rel = to_anchor * s.pose;
    out.viewpoints.push_back(rel.t);
    for (std::size_t i = 0; i < s.cloud.size(); ++i) {
      const Vec3& p = s.cloud.points[i];
      if (p.head<2>().squaredNorm() > crop2) continue;
      if (labelled) out.cloud.push_back(rel * p, s.cloud.labels[i]);
      else out.cloud.push_back(rel * p);
    }
  }
  out.cloud = voxel_deduplicate(out.cloud, params.voxel_leaf);
  if (out.cloud.empty()) {
    return std::nullopt;
  }
  out.distance = travel;
  return out;
}

void PayloadAccumulator::add_scan(TaggedScan scan, double travel) {
  scans_.push_back(std::move(scan));
  travel_ += travel;
}

std::optional<DataPayload> PayloadAccumulator::emit(int anchor_node, const Pose4& anchor_odom,
                                                    const Pose4& anchor_map, double stamp) {
  if (travel_ < params_.travel_threshold) return std::nullopt;
  return build(anchor_node, anchor_odom, anchor_map, stamp);
}

std::optional<DataPayload> PayloadAccumulator::flush(int anchor_node, const Pose4& anchor_odom,
                                                     const Pose4& anchor_map, double stamp) {
  if (scans_.empty()) return std::nullopt;
  return build(anchor_node, anchor_odom, anchor_map, stamp);
}

std::optional<DataPayload> PayloadAccumulator::build(int anchor_node, const Pose4& anchor_odom,
                                                     const Pose4& anchor_map, double stamp) {
  PayloadParams p = params_;
  p.travel_threshold = 0.0;
  auto payload = accumulate_payload(scans_, anchor_odom, travel_, p);
  scans_.clear();
  travel_ = 0.0;
  if (!payload) return std::nullopt;
  payload->id = next_id_++;
  payload->anchor_node = anchor_node;
  payload->anchor_pose = anchor_map;
  payload->stamp = stamp;
  return payload;
}

void write_payload(const std::filesystem::path& dir, const DataPayload& payload) {
  std::filesystem::create_directories(dir);
  const std::string stem = "payload_" + std::to_string(payload.id);
  write_ply(dir / (stem + ".ply"), payload.cloud);
  Json views = Json::array();
  for (const auto& v : payload.viewpoints) views.push_back(to_json_value(v));
  write_json_file(dir / (stem + ".json"), {{"id", payload.id},
                                           {"anchor_node", payload.anchor_node},
                                           {"anchor_pose", payload.anchor_pose},
                                           {"distance", payload.distance},
                                           {"stamp", payload.stamp},
                                           {"cloud", stem + ".ply"},
                                           {"viewpoints", views}});
}

DataPayload read_payload(const std::filesystem::path& sidecar) {
  const Json j = read_json_file(sidecar);
  DataPayload p;
  try {
    p.id = j.at("id").get<int>();
    p.anchor_node = j.at("anchor_node").get<int>();
    p.anchor_pose = j.at("anchor_pose").get<Pose4>();
    p.distance = j.at("distance").get<double>();
    p.stamp = j.at("stamp").get<double>();
    for (const auto& v : j.value("viewpoints", Json::array())) p.viewpoints.push_back(vec3_from_json(v));
    p.cloud = read_ply(sidecar.parent_path() / j.at("cloud").get<std::string>());
  } catch (const Json::exception& e) {
    throw ConfigError(sidecar.string() + ": " + e.what());
  }
  return p;
}

}  // namespace sylva::estimation
