#pragma once

#include <cstdio>
#include <string>

namespace fourcast::detail {

/// 17 significant digits, enough to round-trip any binary64 value.
inline std::string fmt_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

}  // namespace fourcast::detail
