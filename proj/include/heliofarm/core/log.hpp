#pragma once

#include <string_view>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "heliofarm/core/time.hpp"

namespace heliofarm::log {

/// Installs the process logger: plain `<virtual-time> <component> <event>` lines on stderr.
void configure(std::string_view level);

std::shared_ptr<spdlog::logger> logger();

template <typename... Args>
void info(Timestamp vt, std::string_view component, fmt::format_string<Args...> f, Args&&... args) {
  auto& l = *logger();
  if (!l.should_log(spdlog::level::info)) return;
  l.info("{} {} {}", format_datetime(vt, 'T'), component, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void warn(Timestamp vt, std::string_view component, fmt::format_string<Args...> f, Args&&... args) {
  auto& l = *logger();
  if (!l.should_log(spdlog::level::warn)) return;
  l.warn("{} {} {}", format_datetime(vt, 'T'), component, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
void debug(Timestamp vt, std::string_view component, fmt::format_string<Args...> f, Args&&... args) {
  auto& l = *logger();
  if (!l.should_log(spdlog::level::debug)) return;
  l.debug("{} {} {}", format_datetime(vt, 'T'), component, fmt::format(f, std::forward<Args>(args)...));
}

}  // namespace heliofarm::log
