#include "sdcap/logging.h"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace sdcap {

void init_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_logger_st("sdcap");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);

  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("SDCAP_LOG")) {
    const auto parsed = spdlog::level::from_str(env);
    // from_str maps unknown names to off; keep the default instead.
    if (parsed != spdlog::level::off || std::string(env) == "off") level = parsed;
  }
  spdlog::set_level(level);
}

}  // namespace sdcap
