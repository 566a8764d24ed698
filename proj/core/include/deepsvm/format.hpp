#pragma once

#include <charconv>
#include <initializer_list>
#include <ostream>
#include <string>

namespace deepsvm {

/// Decimal text with 17 significant digits; parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline void write_csv_row(std::ostream& os, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) os << ',';
    os << format_double(v);
    first = false;
  }
  os << '\n';
}

}  // namespace deepsvm
