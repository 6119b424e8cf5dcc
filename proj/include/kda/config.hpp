#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kda/common.hpp"

namespace kda {

/// Flat `section.key=value` text: one assignment per line, blank lines and
/// '#' comments ignored, later assignments win.
using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config(std::istream& in, const std::string& source = "<config>") {
  ConfigMap map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t begin = line.find_first_not_of(" \t");
    if (begin == std::string::npos || line[begin] == '#') continue;
    const std::size_t eq = line.find('=', begin);
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const std::size_t a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const std::size_t b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(begin, eq - begin));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    map[key] = trim(line.substr(eq + 1));
  }
  return map;
}

inline ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

class ConfigView {
 public:
  explicit ConfigView(ConfigMap map) : map_(std::move(map)) {}

  const ConfigMap& raw() const { return map_; }

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  std::string require(const std::string& key) const {
    auto it = map_.find(key);
    if (it == map_.end()) throw ConfigError("missing config key '" + key + "'");
    consumed_.insert(key);
    return it->second;
  }

  std::string get(const std::string& key, const std::string& fallback) const {
    auto it = map_.find(key);
    consumed_.insert(key);
    return it == map_.end() ? fallback : it->second;
  }

  std::optional<std::string> maybe(const std::string& key) const {
    auto it = map_.find(key);
    consumed_.insert(key);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }

  long get_long(const std::string& key, long fallback) const {
    auto v = maybe(key);
    return v ? to_long(key, *v) : fallback;
  }

  double get_double(const std::string& key, double fallback) const {
    auto v = maybe(key);
    return v ? to_double(key, *v) : fallback;
  }

  std::optional<double> maybe_double(const std::string& key) const {
    auto v = maybe(key);
    if (!v) return std::nullopt;
    return to_double(key, *v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = maybe(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key '" + key + "' expects a boolean, got '" + *v + "'");
  }

  /// Reject typo'd keys: everything present must have been consumed.
  void check_consumed() const {
    for (const auto& [key, value] : map_) {
      if (!consumed_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
  }

 private:
  long to_long(const std::string& key, const std::string& v) const {
    long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("config key '" + key + "' expects an integer, got '" + v + "'");
    }
    return out;
  }

  double to_double(const std::string& key, const std::string& v) const {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("config key '" + key + "' expects a number, got '" + v + "'");
    }
    return out;
  }

  ConfigMap map_;
  mutable std::set<std::string> consumed_;
};

}  // namespace kda
