#pragma once

// Small text helpers shared by the line-oriented readers and writers.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flames/core.hpp"

namespace flames::text {

// Header line carried by every file format this project writes.
inline constexpr std::string_view kFormatTag = "flames-v1";

// Splits on `delim`, trimming ASCII whitespace around each field. Reuses `out`.
void split(std::string_view line, char delim, std::vector<std::string_view>& out);
std::vector<std::string_view> split(std::string_view line, char delim);

std::string_view trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::string to_lower(std::string_view s);

std::optional<std::int64_t> parse_int(std::string_view s);
std::optional<std::uint64_t> parse_uint(std::string_view s);
std::optional<double> parse_double(std::string_view s);

// Decimal seconds ("1334332274.912") to exact milliseconds; extra fraction
// digits are rounded half away from zero.
std::optional<Millis> parse_seconds_ms(std::string_view s);
// Milliseconds to "S.mmm".
std::string format_seconds_ms(Millis ms);
// Whole seconds; the value must be a multiple of 1000 to round-trip.
std::string format_seconds(Millis ms);

// Shortest round-tripping decimal for a double.
std::string format_double(double v);

}  // namespace flames::text
