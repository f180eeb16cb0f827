#pragma once

#include <string>

namespace excursion {

/// `%.9g`, the fixed precision used for every derived number in CSV output.
std::string format_number(double value);

/// Shortest representation that parses back to the same double.
std::string format_exact(double value);

/// Locale-independent strict parse; throws ParseError naming `what`.
double parse_double(const std::string& text, const char* what = "number");
long long parse_integer(const std::string& text, const char* what = "integer");

/// Trims ASCII whitespace.
std::string trim(const std::string& text);

}  // namespace excursion
