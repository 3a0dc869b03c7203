#pragma once

#include <spdlog/spdlog.h>

namespace sylva {

/// Shared logger. Verbosity comes from the SYLVA_LOG environment variable
/// (trace, debug, info, warn, error, off); default is warn.
spdlog::logger& log();

}  // namespace sylva
