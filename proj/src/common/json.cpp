#include "sylva/common/json.hpp"

#include <fstream>

#include "sylva/common/error.hpp"

namespace sylva {

Json to_json_value(const Vec2& v) { return Json::array({v.x(), v.y()}); }
Json to_json_value(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec2 vec2_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError("expected [x, y], got " + j.dump());
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Vec3 vec3_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("expected [x, y, z], got " + j.dump());
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void to_json(Json& j, const Pose4& p) {
  j = Json{{"x", p.t.x()}, {"y", p.t.y()}, {"z", p.t.z()}, {"yaw", p.yaw}};
}

void from_json(const Json& j, Pose4& p) {
  p.t = {j.at("x").get<double>(), j.at("y").get<double>(), value_or(j, "z", 0.0)};
  p.yaw = value_or(j, "yaw", 0.0);
}

void to_json(Json& j, const Pose6& p) {
  j = Json{{"x", p.t.x()},     {"y", p.t.y()},       {"z", p.t.z()},
           {"roll", p.roll}, {"pitch", p.pitch}, {"yaw", p.yaw}};
}

void from_json(const Json& j, Pose6& p) {
  p.t = {j.at("x").get<double>(), j.at("y").get<double>(), value_or(j, "z", 0.0)};
  p.roll = value_or(j, "roll", 0.0);
  p.pitch = value_or(j, "pitch", 0.0);
  p.yaw = value_or(j, "yaw", 0.0);
}

void to_json(Json& j, const Rect& r) {
  j = Json{{"min_x", r.min_x}, {"min_y", r.min_y}, {"max_x", r.max_x}, {"max_y", r.max_y}};
}

void from_json(const Json& j, Rect& r) {
  r.min_x = j.at("min_x").get<double>();
  r.min_y = j.at("min_y").get<double>();
  r.max_x = j.at("max_x").get<double>();
  r.max_y = j.at("max_y").get<double>();
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open " + path.string());
  }
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << text;
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

}  // namespace sylva
