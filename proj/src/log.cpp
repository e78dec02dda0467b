#include "gbm/log.hpp"

#include <atomic>
#include <iostream>

namespace gbm {
namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::warning)};
}

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_warning(std::string_view message) {
  if (g_level >= static_cast<int>(LogLevel::warning)) std::cerr << "warning: " << message << '\n';
}

void log_info(std::string_view message) {
  if (g_level >= static_cast<int>(LogLevel::info)) std::cerr << message << '\n';
}

}  // namespace gbm
