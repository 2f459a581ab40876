#include "adauction/text.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "adauction/error.hpp"

namespace adauction {

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  if (s == "inf" || s == "+inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double out = 0.0;
  auto first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto res = std::from_chars(first, s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  }
  return out;
}

long long parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  long long out = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view s, std::string_view what) {
  s = trim(s);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw ConfigError("unterminated list for " + std::string(what));
    s = trim(s.substr(1, s.size() - 2));
  }
  std::vector<double> out;
  if (s.empty()) return out;
  if (s.find(':') != std::string_view::npos) {
    auto parts = split(s, ':');
    if (parts.size() != 3) throw ConfigError("range for " + std::string(what) + " must be lo:step:hi");
    double lo = parse_double(parts[0], what), step = parse_double(parts[1], what),
           hi = parse_double(parts[2], what);
    if (!(step > 0) || hi < lo) throw ConfigError("empty or invalid range for " + std::string(what));
    auto count = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
    for (long long k = 0; k <= count; ++k) {
      // Round to the step's decimal grid so 0:0.1:1 yields 0.3, not 0.30000000000000004.
      double v = lo + static_cast<double>(k) * step;
      double scale = 1e12;
      out.push_back(std::round(v * scale) / scale);
    }
    return out;
  }
  for (auto& item : split(s, ',')) out.push_back(parse_double(item, what));
  return out;
}

}  // namespace adauction
