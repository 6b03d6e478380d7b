#pragma once

#include <string>

namespace carotid {

// Thin wrappers so translation units that include torch (which bundles its own
// fmt) never see the spdlog headers.
void log_info(const std::string& message);
void log_warn(const std::string& message);

}  // namespace carotid
