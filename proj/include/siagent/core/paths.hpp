#pragma once

#include <filesystem>

namespace siagent {

/// Root of the shipped data files (scenes, catalogs, prompts, mock scripts).
/// SIAGENT_DATA_DIR overrides the build-time default.
std::filesystem::path data_dir();

}  // namespace siagent
