#pragma once

#include <cstdio>
#include <ostream>
#include <string>

namespace mkv {

// 17 significant digits so doubles round-trip exactly.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace mkv
