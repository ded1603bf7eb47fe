#pragma once

#include <string>

namespace fimcb {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

/// Current level; initialized once from the FIMCB_LOG environment
/// variable (error|info|debug), defaulting to info.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_error(const std::string& message);
void log_info(const std::string& message);
void log_debug(const std::string& message);

} // namespace fimcb
