#pragma once

#include <cstdio>
#include <cstdlib>
#include <string>

namespace vmms {

/// Rounds to the nearest double with at most `digits` significant decimal digits.
inline double round_sig(double v, int digits = 9)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return std::strtod(buf, nullptr);
}

/// Shortest-ish fixed representation used in CSV output.
inline std::string fmt_num(double v, int digits = 9)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

} // namespace vmms
