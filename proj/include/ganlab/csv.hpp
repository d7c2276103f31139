#pragma once

// CSV text conventions used by every artifact writer: '.' decimal point,
// '\n' line endings, header row, and shortest-round-trip float formatting
// (std::to_chars), so identical doubles always serialize to identical bytes
// and parsing the text recovers the exact value.

#include <charconv>
#include <cstdint>
#include <string>

namespace ganlab::csv {

inline std::string format(double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;  // 32 bytes always suffice for shortest double form
    return std::string(buf, p);
}

inline std::string format(std::int64_t v) { return std::to_string(v); }
inline std::string format(int v) { return std::to_string(v); }

}  // namespace ganlab::csv
