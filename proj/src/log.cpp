#include "wikicite/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include <mutex>
#include <string>

namespace wikicite::log {

namespace {

std::shared_ptr<spdlog::logger> make_logger() {
  auto logger = spdlog::stderr_logger_mt("wikicite");
  logger->set_pattern("ts=%Y-%m-%dT%H:%M:%S.%e level=%l %v");
  logger->set_level(spdlog::level::warn);
  return logger;
}

std::shared_ptr<spdlog::logger>& instance() {
  static std::shared_ptr<spdlog::logger> logger = make_logger();
  return logger;
}

}  // namespace

void init(std::string_view level) {
  instance()->set_level(spdlog::level::from_str(std::string(level)));
}

spdlog::logger& get() { return *instance(); }

}  // namespace wikicite::log
