#pragma once

// Minimal helpers for the comma-separated files the toolkit reads. None of
// the schemas use quoting, so a field never contains a comma.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "surjnd/error.hpp"

namespace surjnd::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline long long parse_int(std::string_view s, const std::string& where) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty())
    throw Error(ErrorKind::format, where + ": expected integer, got '" + std::string(s) + "'");
  return v;
}

inline double parse_double(std::string_view s, const std::string& where) {
  // strtod rather than from_chars: it also accepts the hex-float form.
  const std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size())
    throw Error(ErrorKind::format, where + ": expected number, got '" + tmp + "'");
  return v;
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// Reads the header line and checks it against `expected`.
inline void expect_header(std::istream& in, std::string_view expected,
                          const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, what + ": empty file");
  if (trim(line) != expected)
    throw Error(ErrorKind::format, what + ": expected header '" + std::string(expected) +
                                       "', got '" + std::string(trim(line)) + "'");
}

}  // namespace surjnd::csv
