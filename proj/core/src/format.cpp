#include "excursion/format.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <system_error>

#include "excursion/errors.hpp"

namespace excursion {

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  std::string s(buf);
  if (s == "-0") s = "0";
  return s;
}

std::string format_exact(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string trim(const std::string& text) {
  const char* ws = " \t\r\n";
  const auto first = text.find_first_not_of(ws);
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(ws);
  return text.substr(first, last - first + 1);
}

double parse_double(const std::string& text, const char* what) {
  const std::string s = trim(text);
  if (s == "nan") return std::nan("");
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (!s.empty() && *begin == '+') ++begin;
  auto res = std::from_chars(begin, end, value);
  if (s.empty() || res.ec != std::errc{} || res.ptr != end) {
    throw ParseError(std::string("invalid ") + what + ": '" + text + "'");
  }
  return value;
}

long long parse_integer(const std::string& text, const char* what) {
  const std::string s = trim(text);
  long long value = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError(std::string("invalid ") + what + ": '" + text + "'");
  }
  return value;
}

}  // namespace excursion
