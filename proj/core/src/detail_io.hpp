#pragma once

// Internal CSV / number formatting helpers shared by the generator and the
// harness. Not installed; keep out of public headers.

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace hotuner::detail {

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

inline std::vector<std::string_view> split_csv(const std::string& line) {
  std::vector<std::string_view> out;
  std::string_view sv(line);
  std::size_t pos = 0;
  while (true) {
    std::size_t comma = sv.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(sv.substr(pos));
      break;
    }
    out.push_back(sv.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

/// Parses a complete token as double; false on trailing junk or empty.
inline bool parse_double(std::string_view tok, double& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline bool parse_long(std::string_view tok, long& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

/// 17 significant digits: enough for a lossless double round-trip.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace hotuner::detail
