#include "log.hpp"

#include <iostream>
#include <mutex>

namespace protofsm::log {
namespace {

std::mutex g_mu;
Sink g_sink;
Level g_min = Level::kWarn;

const char* level_name(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warning";
    case Level::kError: return "error";
  }
  return "?";
}

}  // namespace

void set_sink(Sink sink) {
  std::lock_guard lock(g_mu);
  g_sink = std::move(sink);
}

void set_min_level(Level level) {
  std::lock_guard lock(g_mu);
  g_min = level;
}

void write(Level level, std::string_view message) {
  std::lock_guard lock(g_mu);
  if (g_sink) {
    g_sink(level, message);
    return;
  }
  if (level < g_min) return;
  std::cerr << "protofsm " << level_name(level) << ": " << message << '\n';
}

}  // namespace protofsm::log
