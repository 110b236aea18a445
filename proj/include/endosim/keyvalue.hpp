#ifndef ENDOSIM_KEYVALUE_HPP
#define ENDOSIM_KEYVALUE_HPP

// Flat key=value text used by every input file except pulse programs.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace endosim {

/// Parse or validation failure tied to a line of input text.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& message)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Strict full-string double conversion. Accepts "inf" and "nan" as from_chars does.
inline bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_shortest(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("format_shortest: conversion failed");
  return std::string(buf, ptr);
}

/// Fixed nine-significant-digit text used in CSV and summary output.
inline std::string format_fixed(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value == 0.0 ? 0.0 : value);
  return buf;
}

class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(std::string_view text) {
    KeyValues kv;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto end = text.find('\n', pos);
      std::string_view line =
          text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = trim(line);
      if (!line.empty()) {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(line_no, "empty key");
        kv.set(std::string(key), std::string(trim(line.substr(eq + 1))), line_no);
      }
      if (end == std::string_view::npos) break;
      pos = end + 1;
    }
    return kv;
  }

  static KeyValues load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      return parse(buf.str());
    } catch (const ParseError& e) {
      throw ParseError(e.line(), path + ": " + e.what());
    }
  }

  /// Apply a "key=value" override string.
  void apply_override(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos || trim(assignment.substr(0, eq)).empty())
      throw std::invalid_argument("override must be key=value: " + std::string(assignment));
    set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
  }

  void set(const std::string& key, const std::string& value, int line = 0) {
    values_[key] = value;
    lines_[key] = line;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    double v = 0.0;
    if (!parse_double(it->second, v))
      throw ParseError(lines_.at(key), "key '" + key + "' expects a number, got '" + it->second + "'");
    return v;
  }

  int get_int(const std::string& key, int fallback) const {
    const double v = get_double(key, fallback);
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw ParseError(lines_.at(key), "key '" + key + "' expects an integer");
    return static_cast<int>(v);
  }

  /// Throws on any key never read through a getter. Call after consuming.
  void require_all_used() const {
    for (const auto& [key, value] : values_)
      if (!used_.count(key)) throw ParseError(lines_.at(key), "unknown key '" + key + "'");
  }

  const std::map<std::string, std::string>& entries() const { return values_; }

  std::string serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  mutable std::set<std::string> used_;
};

}  // namespace endosim

#endif  // ENDOSIM_KEYVALUE_HPP
