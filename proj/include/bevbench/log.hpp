#pragma once

#include <string>

namespace bevbench {

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Read once from BEVBENCH_LOG (error|info|debug); unset or unrecognized
// values mean error-only.
LogLevel log_level();

void log_error(const std::string& msg);
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace bevbench
