#include "siagent/core/paths.hpp"

#include <cstdlib>

#ifndef SIAGENT_DEFAULT_DATA_DIR
#define SIAGENT_DEFAULT_DATA_DIR "data"
#endif

namespace siagent {

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("SIAGENT_DATA_DIR"); env && *env) return env;
    return SIAGENT_DEFAULT_DATA_DIR;
}

}  // namespace siagent
