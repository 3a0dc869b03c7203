#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "sylva/common/json.hpp"

namespace sylva::service {

struct ReplayOptions {
  double speed = 1.0;  // <= 0 replays without pacing
  /// Called with the wall-clock gap before each message; defaults to
  /// std::this_thread::sleep_for.
  std::function<void(double seconds)> sleeper;
};

struct ReplayResult {
  std::size_t messages = 0;
  bool truncated = false;
  std::optional<std::string> warning;
  double span = 0.0;  // simulated seconds between first and last message
};

/// Re-emits the messages of an events.jsonl log in order. A line that does
/// not parse (a torn write) ends the replay with a warning.
ReplayResult replay_events(const std::filesystem::path& log, const std::function<void(const Json&)>& sink,
                           const ReplayOptions& options = {});

}  // namespace sylva::service
