#include "hemosynth/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace hemosynth {
namespace {

LogLevel level_from_env() {
  const char* env = std::getenv("HEMOSYNTH_LOG");
  if (!env) return LogLevel::Warn;
  const std::string v(env);
  if (v == "error") return LogLevel::Error;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

std::atomic<int>& current() {
  static std::atomic<int> level{int(level_from_env())};
  return level;
}

}  // namespace

LogLevel log_level() { return LogLevel(current().load()); }
void set_log_level(LogLevel level) { current() = int(level); }

void log(LogLevel level, std::string_view message) {
  if (int(level) > current()) return;
  static std::mutex m;
  static constexpr const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(m);
  std::cerr << "[" << names[int(level)] << "] " << message << '\n';
}

}  // namespace hemosynth
