#include "gpd/common.hpp"

#include <cstdio>

namespace gpd {

void warn(const std::string& msg) { std::fprintf(stderr, "[gpd] warning: %s\n", msg.c_str()); }

}  // namespace gpd
