#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace adauction {

/// Shortest representation that round-trips exactly.
std::string format_double(double x);

/// Strict full-string parse; throws ConfigError naming `what` on failure.
double parse_double(std::string_view s, std::string_view what = "number");
long long parse_int(std::string_view s, std::string_view what = "integer");

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Accepts "a,b,c", "[a,b,c]" or a range "lo:step:hi" (inclusive, rounded to step).
std::vector<double> parse_double_list(std::string_view s, std::string_view what = "list");

}  // namespace adauction
