#include "carotid/log.hpp"

#include <spdlog/spdlog.h>

namespace carotid {

void log_info(const std::string& message) { spdlog::info("{}", message); }
void log_warn(const std::string& message) { spdlog::warn("{}", message); }

}  // namespace carotid
