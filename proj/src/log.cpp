#include "ade/log.hpp"

#include <cstdlib>
#include <iostream>

namespace ade {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("ADE_LOG");
    if (env != nullptr && std::string(env) == "debug") return LogLevel::Debug;
    return LogLevel::Info;
  }();
  return level;
}

void log_info(const std::string& message) {
  std::cerr << "[info] " << message << "\n";
}

void log_debug(const std::string& message) {
  if (log_level() == LogLevel::Debug) {
    std::cerr << "[debug] " << message << "\n";
  }
}

}  // namespace ade
