#include "gridbound/logging.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

namespace gridbound {

void init_logging() {
  auto logger = spdlog::stderr_logger_mt("gridbound");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);

  const char* env = std::getenv("GRIDBOUND_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    spdlog::set_level(spdlog::level::err);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("GRIDBOUND_LOG='{}' not one of error, info, debug; using info", level);
  }
}

}  // namespace gridbound
