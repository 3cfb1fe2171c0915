#pragma once

#define PSTRAT_VERSION_MAJOR 0
#define PSTRAT_VERSION_MINOR 1
#define PSTRAT_VERSION_PATCH 0

namespace pstrat {
inline constexpr const char* version_string = "0.1.0";
}
