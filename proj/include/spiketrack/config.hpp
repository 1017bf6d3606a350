// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value configuration text.
#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "spiketrack/error.hpp"

namespace spiketrack {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  /// Parses `key = value` lines. '#' starts a comment; blank lines are ignored.
  static KeyValueConfig parse(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string_view s = trim(line);
      if (s.empty()) continue;
      const auto eq = s.find('=');
      if (eq == std::string_view::npos) {
        fail(ErrorKind::validation, "config line " + std::to_string(lineno) + " lacks '='", lineno);
      }
      const std::string key(trim(s.substr(0, eq)));
      if (key.empty()) {
        fail(ErrorKind::validation, "config line " + std::to_string(lineno) + " has empty key",
             lineno);
      }
      cfg.values_[key] = std::string(trim(s.substr(eq + 1)));
    }
    return cfg;
  }

  static KeyValueConfig parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse(in);
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open config " + path.string());
    return parse(in);
  }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return d;
    } catch (const std::exception&) {
      fail(ErrorKind::validation, "config key '" + key + "' is not a number: " + *v);
    }
  }

  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    std::uint64_t out = 0;
    const auto* end = v->data() + v->size();
    const auto [ptr, ec] = std::from_chars(v->data(), end, out);
    if (ec != std::errc{} || ptr != end) {
      fail(ErrorKind::validation, "config key '" + key + "' is not an unsigned integer: " + *v);
    }
    return out;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true" || *v == "yes") return true;
    if (*v == "0" || *v == "false" || *v == "no") return false;
    fail(ErrorKind::validation, "config key '" + key + "' is not a boolean: " + *v);
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace spiketrack
