#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "sylva/common/error.hpp"
#include "sylva/common/point_cloud.hpp"

namespace sylva {

class PlyError : public IoError {
 public:
  PlyError(const std::string& what, std::size_t byte_offset)
      : IoError(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}
  std::size_t byte_offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Writes xyz as float64, plus `surface`/`owner` properties when the cloud
/// carries labels. Always binary little-endian.
void write_ply(const std::filesystem::path& path, const PointCloud& cloud);

/// Reads the vertex element of a binary little-endian PLY. Any scalar
/// property types are accepted; x, y, z are required. Labels are restored
/// when `surface` and `owner` properties are present.
PointCloud read_ply(const std::filesystem::path& path);
PointCloud parse_ply(const std::string& bytes);

}  // namespace sylva
