#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sylva/common/geometry.hpp"

namespace sylva {

using Json = nlohmann::json;

Json to_json_value(const Vec2& v);
Json to_json_value(const Vec3& v);
Vec2 vec2_from_json(const Json& j);
Vec3 vec3_from_json(const Json& j);

void to_json(Json& j, const Pose4& p);
void from_json(const Json& j, Pose4& p);
void to_json(Json& j, const Pose6& p);
void from_json(const Json& j, Pose6& p);
void to_json(Json& j, const Rect& r);
void from_json(const Json& j, Rect& r);

/// Reads a whole JSON document, throwing ConfigError with the path on failure.
Json read_json_file(const std::filesystem::path& path);
/// Writes `j` pretty-printed with a trailing newline; throws IoError.
void write_json_file(const std::filesystem::path& path, const Json& j);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Returns j[key] converted to T, or `fallback` when the key is absent.
template <class T>
T value_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object()) return fallback;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->template get<T>();
}

}  // namespace sylva
