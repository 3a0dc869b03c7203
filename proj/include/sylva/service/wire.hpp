#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "sylva/common/error.hpp"
#include "sylva/common/json.hpp"
#include "sylva/service/config.hpp"

namespace sylva::service {

inline constexpr int kProtocolVersion = 1;

enum class CommandType { DefineSurvey, Start, Interrupt, Resume, Push, SetParams };

std::string to_string(CommandType t);

class WireError : public Error {
 public:
  WireError(const std::string& reason, std::optional<std::int64_t> seq = std::nullopt)
      : Error(reason), seq_(seq) {}
  std::optional<std::int64_t> seq() const { return seq_; }

 private:
  std::optional<std::int64_t> seq_;
};

/// Client-to-server command. `at` pins the command to a simulated time;
/// without it the command applies at the next tick.
struct Command {
  CommandType type = CommandType::Start;
  std::optional<std::int64_t> seq;
  std::optional<double> at;
  std::string source = "operator";
  std::optional<SurveyRequest> survey;
  int goal = 0;
  double push_distance = 0.0;
  double push_heading = 0.0;
  Json params = Json::object();
};

/// Throws WireError with the client's seq when it could be read.
Command command_from_json(const Json& j);
Command parse_command(const std::string& text);
Json command_to_json(const Command& c);

/// Server-to-client envelope: {"type", "seq", "t", "data"}.
Json make_message(const std::string& type, std::int64_t seq, double t, Json data);

}  // namespace sylva::service
