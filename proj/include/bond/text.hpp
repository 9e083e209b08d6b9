#pragma once

// Locale-independent number formatting and CSV field helpers.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bond::text {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

double parse_double(std::string_view field);
std::int64_t parse_int(std::string_view field);

/// Splits on ',' and trims surrounding blanks; no quoting support.
std::vector<std::string_view> split_fields(std::string_view line);

std::string_view trim(std::string_view s);

}  // namespace bond::text
