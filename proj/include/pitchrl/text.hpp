#pragma once

// Small text helpers shared by the CSV writers and readers.

#include <string>
#include <string_view>
#include <vector>

namespace pitchrl::text {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double x);
/// Fixed-point with the given number of decimals.
std::string format_fixed(double x, int decimals);

/// Strict parse of the whole token; throws std::invalid_argument.
double parse_double(std::string_view s);
long long parse_int(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

/// Parses "0,0.05,0.1" (whitespace tolerated).
std::vector<double> parse_double_list(std::string_view s);
std::vector<long long> parse_int_list(std::string_view s);

}  // namespace pitchrl::text
