// Copyright 2026 The Nowcast Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NOWCAST_CONFIG_HPP
#define NOWCAST_CONFIG_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "nowcast/error.hpp"

namespace nowcast {

/**
 * Flat `key = value` text configuration. Lines starting with '#' and blank
 * lines are ignored; keys are conventionally dotted (`train.epochs`).
 * Serialization is sorted by key so equal configs produce equal bytes.
 */
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text) {
    KeyValueConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      line = trim(line);
      if (line.empty() || line.front() == '#') {
        if (end == text.size()) break;
        continue;
      }
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      }
      const std::string_view key = trim(line.substr(0, eq));
      if (key.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      }
      cfg.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
      if (end == text.size()) break;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
  }

  template <typename N>
  N get_number(const std::string& key, N fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    return parse_number<N>(*v, key);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config key " + key + ": expected a boolean, got '" + *v + "'");
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

  template <typename N>
  void set_number(const std::string& key, N value) {
    set(key, format_number(value));
  }

  void merge(const KeyValueConfig& other) {
    for (const auto& [k, v] : other.values_) values_[k] = v;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  template <typename N>
  static N parse_number(std::string_view text, const std::string& key) {
    N out{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
      throw ConfigError("config key " + key + ": cannot parse '" + std::string(text) + "'");
    }
    return out;
  }

  /// Shortest representation that round-trips exactly.
  template <typename N>
  static std::string format_number(N value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  std::map<std::string, std::string> values_;
};

/// FNV-1a, used for config fingerprints.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace nowcast

#endif  // NOWCAST_CONFIG_HPP
