#include "sylva/service/replay.hpp"

#include <chrono>
#include <fstream>
#include <thread>

#include "sylva/common/error.hpp"
#include "sylva/common/log.hpp"

namespace sylva::service {

ReplayResult replay_events(const std::filesystem::path& path, const std::function<void(const Json&)>& sink,
                           const ReplayOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  auto sleep = options.sleeper ? options.sleeper : [](double s) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
  ReplayResult out;
  std::optional<double> first;
  std::optional<double> previous;
  std::string line;
  std::size_t number = 0;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::size_t at = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    Json msg;
    try {
      msg = Json::parse(line);
      if (!msg.is_object() || !msg.contains("t") || !msg.at("t").is_number()) throw Error("missing time");
    } catch (const std::exception&) {
      out.truncated = true;
      out.warning = "event log truncated at line " + std::to_string(number) + " (byte " + std::to_string(at) +
                    "); replayed " + std::to_string(out.messages) + " messages";
      log().warn("{}", *out.warning);
      break;
    }
    const double t = msg.at("t").get<double>();
    if (!first) first = t;
    if (previous && options.speed > 0.0 && t > *previous) sleep((t - *previous) / options.speed);
    previous = t;
    sink(msg);
    ++out.messages;
  }
  if (first) out.span = *previous - *first;
  return out;
}

}  // namespace sylva::service
