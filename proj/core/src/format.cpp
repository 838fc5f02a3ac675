// SPDX-License-Identifier: Apache-2.0
#include "bootdiag/format.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace bootdiag {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_double_hex(double v) {
  char buf[64];
  // to_chars hex omits the "0x" prefix; strtod wants it back on parse, and
  // for negatives it must sit between the sign and the digits.
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  std::string s(buf, res.ptr);
  if (!s.empty() && s[0] == '-') return "-0x" + s.substr(1);
  return "0x" + s;
}

std::optional<double> parse_double(std::string_view token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && std::isspace(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(token[e - 1]))) --e;
  if (b == e) return std::nullopt;
  const std::string t(token.substr(b, e - b));
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

}  // namespace bootdiag
