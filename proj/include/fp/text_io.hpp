#pragma once

#include <charconv>
#include <istream>
#include <sstream>
#include <string>
#include <system_error>

#include "fp/errors.hpp"

namespace fp::text {

// Shortest representation that parses back to the same double.
inline std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string &tok, const std::string &what) {
  double v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError("bad " + what + " '" + tok + "'");
  return v;
}

inline long long parse_int(const std::string &tok, const std::string &what) {
  long long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError("bad " + what + " '" + tok + "'");
  return v;
}

// Next non-blank line split into tokens; false at end of input.
inline bool next_fields(std::istream &in, std::istringstream &fields) {
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos)
      continue;
    fields.clear();
    fields.str(line);
    return true;
  }
  return false;
}

} // namespace fp::text
