#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace marqoe {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

// Verbosity comes from the MARQOE_LOG environment variable
// (debug | info | warn | error | off); default is warn.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("MARQOE_LOG");
    if (env == nullptr) return LogLevel::Warn;
    if (std::strcmp(env, "debug") == 0) return LogLevel::Debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::Info;
    if (std::strcmp(env, "warn") == 0) return LogLevel::Warn;
    if (std::strcmp(env, "error") == 0) return LogLevel::Error;
    if (std::strcmp(env, "off") == 0) return LogLevel::Off;
    return LogLevel::Warn;
  }();
  return level;
}

inline void log_at(LogLevel lvl, const char* tag, const std::string& msg) {
  if (lvl < log_level()) return;
  std::fprintf(stderr, "[marqoe:%s] %s\n", tag, msg.c_str());
}

inline void log_debug(const std::string& msg) { log_at(LogLevel::Debug, "debug", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::Info, "info", msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::Warn, "warn", msg); }
inline void log_error(const std::string& msg) { log_at(LogLevel::Error, "error", msg); }

}  // namespace marqoe
