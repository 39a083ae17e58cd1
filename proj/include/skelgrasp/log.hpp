#pragma once

#include <functional>
#include <string_view>

namespace skelgrasp {

enum class LogLevel { Debug, Info, Warning, Error };
std::string_view to_string(LogLevel level);

using LogSink = std::function<void(LogLevel, std::string_view)>;

/// Replaces the process-wide sink (default: warnings and errors to stderr). Thread safe.
void set_log_sink(LogSink sink);
void log_message(LogLevel level, std::string_view message);

inline void log_warning(std::string_view message) { log_message(LogLevel::Warning, message); }
inline void log_info(std::string_view message) { log_message(LogLevel::Info, message); }

}  // namespace skelgrasp
