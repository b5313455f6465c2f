#pragma once

#include <spdlog/spdlog.h>

#include <memory>
#include <string_view>

namespace wikicite::log {

// Structured single-line records on stderr: `ts=... level=... event=... key=value ...`.
void init(std::string_view level);
spdlog::logger& get();

}  // namespace wikicite::log
