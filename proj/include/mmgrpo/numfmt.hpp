#pragma once

#include <cstdio>
#include <string>

namespace mmgrpo {

/// Formats a double with 17 significant digits, enough for bit-exact
/// round-trips through text.
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace mmgrpo
