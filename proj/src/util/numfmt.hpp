#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace cw {

// Shortest decimal form that round-trips the double, matching what the JSON
// serializer emits, so CSV and NDJSON agree on number text.
inline void append_double(std::string& out, double v) {
    if (std::isnan(v)) {
        out += "null";
        return;
    }
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

inline std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

// Round to the 1e-6 fixed-point grid (the simulator publishes on this grid;
// the column store's delta encoding is lossless on it).
inline double quantize6(double v) {
    return static_cast<double>(std::llround(v * 1e6)) / 1e6;
}

} // namespace cw
