#pragma once

#include <memory>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace catchphrase {

/// Library-wide logger ("catchphrase"), stderr by default. Tests attach extra
/// sinks to inspect warnings.
inline std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto existing = spdlog::get("catchphrase");
    if (existing) return existing;
    return spdlog::stderr_color_mt("catchphrase");
  }();
  return instance;
}

}  // namespace catchphrase
