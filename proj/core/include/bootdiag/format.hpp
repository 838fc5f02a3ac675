// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace bootdiag {

// Shortest decimal string that round-trips to the same double.  Used for all
// numeric CSV output so files are byte-identical across runs and worker
// counts.
std::string format_double(double v);

// Hexadecimal float ("%a" style), bit-exact across platforms.  Used in table
// cache files and table keys.
std::string format_double_hex(double v);

// Parses a decimal or hexadecimal double; the full trimmed token must be
// consumed.  Returns nullopt on malformed input (including empty).
std::optional<double> parse_double(std::string_view token);

}  // namespace bootdiag
