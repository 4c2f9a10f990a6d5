#include "ftbert/core/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ftbert {

namespace {

std::atomic<LogLevel> g_level{LogLevel::kInfo};
std::mutex g_mutex;

void emit(LogLevel level, const char* tag, std::string_view message) {
  if (level < g_level.load()) return;
  std::lock_guard<std::mutex> lock(g_mutex);
  std::cerr << '[' << tag << "] " << message << '\n';
}

}  // namespace

void set_log_level(LogLevel level) { g_level.store(level); }
LogLevel log_level() { return g_level.load(); }

void log_info(std::string_view message) { emit(LogLevel::kInfo, "info", message); }
void log_warning(std::string_view message) { emit(LogLevel::kWarning, "warn", message); }

}  // namespace ftbert
