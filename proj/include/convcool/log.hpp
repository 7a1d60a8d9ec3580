#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace convcool {

enum class LogLevel { kInfo, kWarning };

using LogSink = std::function<void(LogLevel, const std::string&)>;

namespace detail {
inline std::mutex& log_mutex() {
  static std::mutex m;
  return m;
}
inline LogSink& log_sink() {
  static LogSink sink = [](LogLevel level, const std::string& msg) {
    if (level == LogLevel::kWarning) std::cerr << "warning: " << msg << '\n';
  };
  return sink;
}
}  // namespace detail

// Replaces the process-wide sink; returns the previous one.
inline LogSink set_log_sink(LogSink sink) {
  std::lock_guard lock(detail::log_mutex());
  return std::exchange(detail::log_sink(), std::move(sink));
}

inline void log(LogLevel level, const std::string& msg) {
  std::lock_guard lock(detail::log_mutex());
  if (detail::log_sink()) detail::log_sink()(level, msg);
}

}  // namespace convcool
