#pragma once

#include <charconv>
#include <string>

namespace cdpg {

// Shortest round-trip decimal for a double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace cdpg
