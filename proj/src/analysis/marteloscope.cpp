#include "sylva/analysis/marteloscope.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace sylva::analysis {

std::vector<MarteloscopeRow> marteloscope_rows(const ForestInventory& inventory) {
  std::vector<MarteloscopeRow> rows;
  for (const auto& [id, t] : inventory.trees()) {
    MarteloscopeRow r;
    r.id = id;
    r.x = t.position.x();
    r.y = t.position.y();
    r.dbh = t.traits.dbh;
    r.height = t.traits.height;
    r.coverage_bins = static_cast<int>(t.coverage.size());
    std::vector<std::string> flags;
    if (!t.reconstructed) flags.emplace_back("reconstruction_failed");
    if (t.traits.dbh_extrapolated) flags.emplace_back("dbh_extrapolated");
    if (t.traits.fov_limited) flags.emplace_back("fov_limited");
    if (std::any_of(t.circles.begin(), t.circles.end(), [](const StemCircle& c) { return c.low_coverage; })) {
      flags.emplace_back("low_coverage");
    }
    for (std::size_t i = 0; i < flags.size(); ++i) r.flags += (i ? "|" : "") + flags[i];
    rows.push_back(r);
  }
  return rows;
}

std::string marteloscope_csv(const std::vector<MarteloscopeRow>& rows) {
  std::string out = "id,x,y,dbh,height,coverage_bins,flags\n";
  for (const MarteloscopeRow& r : rows) {
    out += fmt::format("{},{:.4f},{:.4f},{},{:.3f},{},{}\n", r.id, r.x, r.y,
                       r.dbh ? fmt::format("{:.4f}", *r.dbh) : std::string(), r.height, r.coverage_bins, r.flags);
  }
  return out;
}

Json marteloscope_geojson(const std::vector<MarteloscopeRow>& rows) {
  Json features = Json::array();
  for (const MarteloscopeRow& r : rows) {
    Json props{{"id", r.id}, {"height", r.height}, {"coverage_bins", r.coverage_bins}, {"flags", r.flags}};
    props["dbh"] = r.dbh ? Json(*r.dbh) : Json(nullptr);
    features.push_back(Json{{"type", "Feature"},
                            {"geometry", {{"type", "Point"}, {"coordinates", {r.x, r.y}}}},
                            {"properties", props}});
  }
  return Json{{"type", "FeatureCollection"}, {"crs", {{"name", "local_map_frame"}}}, {"features", features}};
}

std::string marteloscope_svg(const std::vector<MarteloscopeRow>& rows) {
  double min_x = 0.0, min_y = 0.0, max_x = 10.0, max_y = 10.0;
  if (!rows.empty()) {
    min_x = max_x = rows.front().x;
    min_y = max_y = rows.front().y;
    for (const MarteloscopeRow& r : rows) {
      min_x = std::min(min_x, r.x);
      max_x = std::max(max_x, r.x);
      min_y = std::min(min_y, r.y);
      max_y = std::max(max_y, r.y);
    }
  }
  const double margin = 5.0;
  const double scale = 10.0;  // px per m
  const double w = (max_x - min_x + 2 * margin) * scale;
  const double h = (max_y - min_y + 2 * margin) * scale;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.1f} {:.1f}\">\n",
      w, h, w, h);
  out += fmt::format("<rect width=\"{:.1f}\" height=\"{:.1f}\" fill=\"#f7f5ee\"/>\n", w, h);
  for (const MarteloscopeRow& r : rows) {
    const double cx = (r.x - min_x + margin) * scale;
    const double cy = h - (r.y - min_y + margin) * scale;
    // Circle radius scaled up 5x from the stem radius for legibility.
    const double radius = r.dbh ? std::max(*r.dbh * 0.5 * 5.0 * scale, 1.5) : 1.5;
    const char* fill = r.dbh ? "#3a7d44" : "#9a9a9a";
    out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"{:.2f}\" fill=\"{}\"><title>tree {}</title></circle>\n",
                       cx, cy, radius, fill, r.id);
  }
  out += "</svg>\n";
  return out;
}

std::vector<MarteloscopeRow> parse_marteloscope_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<MarteloscopeRow> rows;
  if (!std::getline(in, line) || line.rfind("id,x,y", 0) != 0) throw IoError("marteloscope CSV: missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (line.back() == ',') cols.emplace_back();
    if (cols.size() != 7) throw IoError("marteloscope CSV: bad row '" + line + "'");
    MarteloscopeRow r;
    try {
      r.id = std::stoi(cols[0]);
      r.x = std::stod(cols[1]);
      r.y = std::stod(cols[2]);
      if (!cols[3].empty()) r.dbh = std::stod(cols[3]);
      r.height = std::stod(cols[4]);
      r.coverage_bins = std::stoi(cols[5]);
    } catch (const std::exception&) {
      throw IoError("marteloscope CSV: bad number in '" + line + "'");
    }
    r.flags = cols[6];
    rows.push_back(r);
  }
  return rows;
}

std::vector<MarteloscopeRow> read_marteloscope_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_marteloscope_csv(ss.str());
}

MarteloscopeFiles export_marteloscope(const ForestInventory& inventory, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto rows = marteloscope_rows(inventory);
  MarteloscopeFiles files{dir / "marteloscope.csv", dir / "marteloscope.geojson", dir / "marteloscope.svg"};
  write_text_file(files.csv, marteloscope_csv(rows));
  write_json_file(files.geojson, marteloscope_geojson(rows));
  write_text_file(files.svg, marteloscope_svg(rows));
  return files;
}

}  // namespace sylva::analysis
