#pragma once

#include <cstdlib>
#include <string>

#include <spdlog/spdlog.h>

namespace tdti {

/// Applies TDTI_LOG (trace, debug, info, warn, error, off) to the default
/// logger. Unset means warn.
inline void configure_logging() {
    const char* env = std::getenv("TDTI_LOG");
    const std::string level = env != nullptr ? env : "warn";
    spdlog::set_level(spdlog::level::from_str(level));
    spdlog::set_pattern("[%l] %v");
}

}  // namespace tdti
