#include "bevbench/log.hpp"

#include <cstdlib>
#include <iostream>

namespace bevbench {

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* v = std::getenv("BEVBENCH_LOG");
    if (!v) return LogLevel::kError;
    const std::string s(v);
    if (s == "debug") return LogLevel::kDebug;
    if (s == "info") return LogLevel::kInfo;
    return LogLevel::kError;
  }();
  return level;
}

namespace {
void emit(LogLevel at, const char* tag, const std::string& msg) {
  if (static_cast<int>(log_level()) >= static_cast<int>(at))
    std::cerr << "[" << tag << "] " << msg << "\n";
}
}  // namespace

void log_error(const std::string& msg) { emit(LogLevel::kError, "error", msg); }
void log_info(const std::string& msg) { emit(LogLevel::kInfo, "info", msg); }
void log_debug(const std::string& msg) { emit(LogLevel::kDebug, "debug", msg); }

}  // namespace bevbench
