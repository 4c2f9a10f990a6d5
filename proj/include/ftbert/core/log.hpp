#pragma once

#include <string_view>

namespace ftbert {

enum class LogLevel { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kSilent = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();

void log_info(std::string_view message);
void log_warning(std::string_view message);

}  // namespace ftbert
