#include "sylva/common/ply.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace sylva {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

namespace {

enum class ScalarType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

std::size_t scalar_size(ScalarType t) {
  switch (t) {
    case ScalarType::Int8:
    case ScalarType::UInt8:
      return 1;
    case ScalarType::Int16:
    case ScalarType::UInt16:
      return 2;
    case ScalarType::Int32:
    case ScalarType::UInt32:
    case ScalarType::Float32:
      return 4;
    case ScalarType::Float64:
      return 8;
  }
  return 0;
}

bool parse_scalar_type(const std::string& s, ScalarType& out) {
  if (s == "char" || s == "int8") out = ScalarType::Int8;
  else if (s == "uchar" || s == "uint8") out = ScalarType::UInt8;
  else if (s == "short" || s == "int16") out = ScalarType::Int16;
  else if (s == "ushort" || s == "uint16") out = ScalarType::UInt16;
  else if (s == "int" || s == "int32") out = ScalarType::Int32;
  else if (s == "uint" || s == "uint32") out = ScalarType::UInt32;
  else if (s == "float" || s == "float32") out = ScalarType::Float32;
  else if (s == "double" || s == "float64") out = ScalarType::Float64;
  else return false;
  return true;
}

template <class T>
T load(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_scalar(const char* p, ScalarType t) {
  switch (t) {
    case ScalarType::Int8: return load<std::int8_t>(p);
    case ScalarType::UInt8: return load<std::uint8_t>(p);
    case ScalarType::Int16: return load<std::int16_t>(p);
    case ScalarType::UInt16: return load<std::uint16_t>(p);
    case ScalarType::Int32: return load<std::int32_t>(p);
    case ScalarType::UInt32: return load<std::uint32_t>(p);
    case ScalarType::Float32: return load<float>(p);
    case ScalarType::Float64: return load<double>(p);
  }
  return 0.0;
}

}  // namespace

void write_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  const bool labelled = cloud.has_labels();
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n";
  if (labelled) {
    out << "property uchar surface\nproperty int owner\n";
  }
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    const double xyz[3] = {p.x(), p.y(), p.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    if (labelled) {
      const auto surface = static_cast<std::uint8_t>(cloud.labels[i].surface);
      const std::int32_t owner = cloud.labels[i].owner;
      out.write(reinterpret_cast<const char*>(&surface), 1);
      out.write(reinterpret_cast<const char*>(&owner), 4);
    }
  }
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_ply(buffer.str());
}

PointCloud parse_ply(const std::string& bytes) {
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    const std::size_t start = pos;
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) {
      throw PlyError("unterminated PLY header", start);
    }
    line = bytes.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    pos = nl + 1;
    return start;
  };

  std::string line;
  next_line(line);
  if (line != "ply") {
    throw PlyError("missing 'ply' magic", 0);
  }

  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  bool vertex_first = true;
  std::vector<Property> props;
  std::size_t stride = 0;
  while (true) {
    const std::size_t at = next_line(line);
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "end_header") {
      break;
    }
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "binary_little_endian") {
        throw PlyError("unsupported PLY format '" + fmt + "'", at);
      }
    } else if (keyword == "element") {
      std::string name;
      long long count = -1;
      ls >> name >> count;
      if (!ls || count < 0) {
        throw PlyError("malformed element line", at);
      }
      in_vertex = (name == "vertex");
      if (in_vertex) {
        seen_vertex = true;
        vertex_count = static_cast<std::size_t>(count);
      } else if (!seen_vertex) {
        vertex_first = false;
      }
    } else if (keyword == "property") {
      std::string type;
      ls >> type;
      if (type == "list") {
        if (in_vertex) {
          throw PlyError("list properties on vertices are not supported", at);
        }
        continue;
      }
      std::string name;
      ls >> name;
      ScalarType st;
      if (!parse_scalar_type(type, st) || name.empty()) {
        throw PlyError("malformed property line", at);
      }
      if (in_vertex) {
        props.push_back({name, st, stride});
        stride += scalar_size(st);
      }
    } else if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) {
      continue;
    } else {
      throw PlyError("unknown header keyword '" + keyword + "'", at);
    }
  }
  if (!seen_vertex) {
    throw PlyError("no vertex element", pos);
  }
  if (!vertex_first) {
    throw PlyError("vertex element must come first", pos);
  }

  auto find = [&](const std::string& n) -> const Property* {
    for (const auto& p : props) {
      if (p.name == n) return &p;
    }
    return nullptr;
  };
  const Property* px = find("x");
  const Property* py = find("y");
  const Property* pz = find("z");
  if (!px || !py || !pz) {
    throw PlyError("vertex element lacks x/y/z", pos);
  }
  const Property* psurface = find("surface");
  const Property* powner = find("owner");
  const bool labelled = psurface && powner;

  const std::size_t body = bytes.size() - pos;
  if (body < vertex_count * stride) {
    const std::size_t complete = stride ? body / stride : 0;
    throw PlyError("truncated vertex data: " + std::to_string(complete) + " of " +
                       std::to_string(vertex_count) + " vertices",
                   pos + complete * stride);
  }

  PointCloud cloud;
  cloud.reserve(vertex_count, labelled);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    const char* rec = bytes.data() + pos + i * stride;
    const Vec3 p(read_scalar(rec + px->offset, px->type), read_scalar(rec + py->offset, py->type),
                 read_scalar(rec + pz->offset, pz->type));
    if (labelled) {
      PointLabel label;
      label.surface = static_cast<Surface>(static_cast<int>(read_scalar(rec + psurface->offset, psurface->type)));
      label.owner = static_cast<std::int32_t>(read_scalar(rec + powner->offset, powner->type));
      cloud.push_back(p, label);
    } else {
      cloud.push_back(p);
    }
  }
  return cloud;
}

}  // namespace sylva
