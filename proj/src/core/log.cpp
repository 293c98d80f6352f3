#include "heliofarm/core/log.hpp"

#include <mutex>

#include <spdlog/sinks/stdout_sinks.h>

namespace heliofarm::log {

namespace {

std::shared_ptr<spdlog::logger> make_logger() {
  auto l = std::make_shared<spdlog::logger>("heliofarm", std::make_shared<spdlog::sinks::stderr_sink_mt>());
  l->set_pattern("%v");
  l->set_level(spdlog::level::warn);
  return l;
}

std::shared_ptr<spdlog::logger>& instance() {
  static std::shared_ptr<spdlog::logger> l = make_logger();
  return l;
}

}  // namespace

void configure(std::string_view level) {
  logger()->set_level(spdlog::level::from_str(std::string(level)));
}

std::shared_ptr<spdlog::logger> logger() { return instance(); }

}  // namespace heliofarm::log
