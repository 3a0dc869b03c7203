#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "sylva/service/runner.hpp"

namespace sylva::testing {

/// Small plot with 5 m rows, a few trees and optional damp patches.
inline service::MissionConfig small_mission(std::uint64_t seed, int trees = 4, int damp = 0, double width = 30.0,
                                            double height = 10.0) {
  service::MissionConfig c;
  c.name = "small";
  c.world.extent = {0.0, 0.0, width, height};
  c.world.terrain.amplitude = 0.1;
  c.world.trees.count = trees;
  if (damp > 0) c.world.patches = {{damp, {1.5, 2.5}, sim::PatchType::Damp}};
  c.world.seed = seed;
  c.seed = seed;
  c.survey = service::SurveyRequest{{{0.0, 0.0}, {width, 0.0}, {width, height}, {0.0, height}}, 5.0, 10.0, 0.0};
  c.max_time = 900.0;
  return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path() /
                   ("sylva_" + name + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

/// Collects every message a runner emits.
struct MessageLog {
  std::vector<Json> messages;

  service::MissionRunner::Sink sink() {
    return [this](const Json& m) { messages.push_back(m); };
  }
  std::vector<Json> of_type(const std::string& type) const {
    std::vector<Json> out;
    for (const auto& m : messages) {
      if (m.at("type") == type) out.push_back(m);
    }
    return out;
  }
  std::vector<Json> events(const std::string& kind) const {
    std::vector<Json> out;
    for (const auto& m : messages) {
      if (m.at("type") == "event" && m.at("data").value("kind", "") == kind) out.push_back(m);
    }
    return out;
  }
};

}  // namespace sylva::testing
