#pragma once

#include <string>

namespace ade {

enum class LogLevel { Debug = 0, Info = 1 };

// Threshold comes from ADE_LOG (debug|info); defaults to info.
LogLevel log_level();

// Both write to stderr; stdout stays reserved for command output.
void log_info(const std::string& message);
void log_debug(const std::string& message);

}  // namespace ade
