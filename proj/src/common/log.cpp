#include "sylva/common/log.hpp"

#include <cstdlib>
#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace sylva {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("sylva");
    l->set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SYLVA_LOG")) {
      l->set_level(spdlog::level::from_str(env));
    }
    l->set_pattern("[%l] %v");
    return l;
  }();
  return *logger;
}

}  // namespace sylva
