#pragma once

#include <atomic>
#include <cstdio>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace ribkit::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {
inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::info};
  return level;
}
inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}
inline Sink& sink() {
  static Sink s = [](Level lvl, std::string_view msg) {
    static constexpr const char* names[] = {"debug", "info", "warn", "error"};
    std::fprintf(stderr, "[%s] %.*s\n", names[static_cast<int>(lvl)],
                 static_cast<int>(msg.size()), msg.data());
  };
  return s;
}
}  // namespace detail

inline void set_level(Level level) { detail::threshold().store(level); }
inline Level level() { return detail::threshold().load(); }

// Replaces the output sink and returns the previous one.
inline Sink set_sink(Sink s) {
  std::lock_guard<std::mutex> lock(detail::sink_mutex());
  std::swap(detail::sink(), s);
  return s;
}

inline void write(Level lvl, std::string_view msg) {
  if (lvl < level()) return;
  std::lock_guard<std::mutex> lock(detail::sink_mutex());
  detail::sink()(lvl, msg);
}

inline void debug(std::string_view m) { write(Level::debug, m); }
inline void info(std::string_view m) { write(Level::info, m); }
inline void warn(std::string_view m) { write(Level::warn, m); }
inline void error(std::string_view m) { write(Level::error, m); }

inline std::optional<Level> parse_level(std::string_view name) {
  if (name == "debug") return Level::debug;
  if (name == "info") return Level::info;
  if (name == "warn") return Level::warn;
  if (name == "error") return Level::error;
  if (name == "off") return Level::off;
  return std::nullopt;
}

}  // namespace ribkit::log
