#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace segtext {

using TokenId = std::uint32_t;

/// Base exception for every failure raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A file or stream did not match its documented format.
class FormatError : public Error {
public:
  using Error::Error;
};

namespace detail {

/// Round-trippable text form of a double ("inf"/"-inf" for infinities).
inline std::string format_double(double v, int precision = 17) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

inline double parse_double(std::string_view s) {
  std::string tmp(s);
  if (tmp == "inf" || tmp == "+inf") return INFINITY;
  if (tmp == "-inf") return -INFINITY;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tmp, &used);
  } catch (const std::exception&) {
    throw FormatError("not a number: '" + tmp + "'");
  }
  if (used != tmp.size()) throw FormatError("not a number: '" + tmp + "'");
  return v;
}

inline std::size_t parse_count(std::string_view s) {
  std::string tmp(s);
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!tmp.empty() && tmp[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(tmp, &used);
  } catch (const std::exception&) {
    throw FormatError("not a count: '" + tmp + "'");
  }
  if (used != tmp.size()) throw FormatError("not a count: '" + tmp + "'");
  return static_cast<std::size_t>(v);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

/// log(1 + e^x) without overflow.
inline double log1pexp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

/// Runs body(begin, end) over [0, n) split into contiguous chunks.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  if (threads <= 1 || n < 2 * threads) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    std::size_t b = t * chunk;
    std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail
}  // namespace segtext
