#pragma once

#include <string_view>

namespace hemosynth {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

/// Verbosity from HEMOSYNTH_LOG (error, warn, info, debug); default warn.
LogLevel log_level();
void set_log_level(LogLevel level);
void log(LogLevel level, std::string_view message);

}  // namespace hemosynth
