#pragma once

#include <functional>
#include <string>
#include <string_view>

namespace protofsm::log {

enum class Level { kDebug, kInfo, kWarn, kError };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink. Passing an empty function restores stderr.
void set_sink(Sink sink);
void set_min_level(Level level);

void write(Level level, std::string_view message);

inline void debug(std::string_view m) { write(Level::kDebug, m); }
inline void info(std::string_view m) { write(Level::kInfo, m); }
inline void warn(std::string_view m) { write(Level::kWarn, m); }
inline void error(std::string_view m) { write(Level::kError, m); }

}  // namespace protofsm::log
