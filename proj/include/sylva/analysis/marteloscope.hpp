#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sylva/analysis/inventory.hpp"

namespace sylva::analysis {

struct MarteloscopeRow {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  std::optional<double> dbh;
  double height = 0.0;
  int coverage_bins = 0;
  std::string flags;  // '|'-separated
};

std::vector<MarteloscopeRow> marteloscope_rows(const ForestInventory& inventory);

std::string marteloscope_csv(const std::vector<MarteloscopeRow>& rows);
Json marteloscope_geojson(const std::vector<MarteloscopeRow>& rows);
std::string marteloscope_svg(const std::vector<MarteloscopeRow>& rows);
std::vector<MarteloscopeRow> parse_marteloscope_csv(const std::string& text);
std::vector<MarteloscopeRow> read_marteloscope_csv(const std::filesystem::path& path);

struct MarteloscopeFiles {
  std::filesystem::path csv;
  std::filesystem::path geojson;
  std::filesystem::path svg;
};

/// Writes marteloscope.csv, marteloscope.geojson and marteloscope.svg.
MarteloscopeFiles export_marteloscope(const ForestInventory& inventory, const std::filesystem::path& dir);

}  // namespace sylva::analysis
