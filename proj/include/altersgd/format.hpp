#pragma once

#include <charconv>
#include <string>

namespace altersgd {

/// Shortest decimal text that reads back to exactly `v`.
[[nodiscard]] inline std::string format_real(double v) {
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

}  // namespace altersgd
