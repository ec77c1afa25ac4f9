#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ideolens {

// Decodes UTF-8 into code points. Invalid byte sequences decode to U+FFFD,
// one replacement per rejected byte, so malformed text still round-trips a
// stable length.
std::vector<char32_t> utf8_decode(std::string_view s);

std::string utf8_encode(const std::vector<char32_t>& cps);

// "2019-08-15T12:34:56Z" (optional fractional seconds, "Z" or "+00:00")
// to seconds since the Unix epoch. Throws ParseError on anything else.
std::int64_t parse_iso8601(std::string_view s);

std::string format_iso8601(std::int64_t epoch_seconds);

// Shortest round-trip decimal form (std::to_chars), the one float format used
// in every artifact so identical values always produce identical bytes.
std::string format_double(double v);

std::string format_float(float v);

bool starts_with(std::string_view s, std::string_view prefix);

std::vector<std::string> split_ws(std::string_view s);

std::string to_lower(std::string_view s);

std::string hex64(std::uint64_t v);

}  // namespace ideolens
