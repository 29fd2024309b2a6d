#pragma once

#include <string>
#include <vector>

namespace painmtl {

// Shortest decimal form that round-trips to the same binary64 value.
std::string format_double(double value);

// Parse a full string as double; throws ParseError naming `what` on failure.
double parse_double(const std::string& text, const std::string& what);
long parse_long(const std::string& text, const std::string& what);

// Split a CSV line at commas. No quoting: fields in this project never
// contain commas.
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace painmtl
