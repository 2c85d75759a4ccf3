#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>

#include "medground/core/result.hpp"
#include "medground/core/text.hpp"

namespace medground {

/// Flat TOML-style `key = value` file: quoted strings, integers, floats and
/// booleans; `#` starts a comment. Tables and arrays are not supported.
class KvConfig {
 public:
  using Value = std::variant<std::string, std::int64_t, double, bool>;

  static KvConfig parse(std::string_view text, const std::string& origin = "<config>") {
    KvConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string where = origin + ":" + std::to_string(lineno);
      std::string body = strip_comment(line);
      body = trim(body);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
      const std::string key = trim(body.substr(0, eq));
      const std::string raw = trim(body.substr(eq + 1));
      if (key.empty()) throw ConfigError(where + ": empty key");
      if (cfg.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
      cfg.values_[key] = parse_value(raw, where);
    }
    return cfg;
  }

  static KvConfig load(const std::string& path) {
    std::string text;
    try {
      text = read_file(path);
    } catch (const DataError&) {
      throw ConfigError("missing config file: " + path);
    }
    return parse(text, path);
  }

  [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }
  [[nodiscard]] const std::map<std::string, Value>& values() const { return values_; }

  void set(const std::string& key, Value v) { values_[key] = std::move(v); }

 private:
  static std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
      if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
  }

  static Value parse_value(const std::string& raw, const std::string& where) {
    if (raw.empty()) throw ConfigError(where + ": missing value");
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') throw ConfigError(where + ": unterminated string");
      std::string out;
      for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
        if (raw[i] == '\\' && i + 2 < raw.size()) {
          const char n = raw[++i];
          out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
        } else {
          out.push_back(raw[i]);
        }
      }
      return out;
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    try {
      std::size_t used = 0;
      if (raw.find_first_of(".eE") == std::string::npos) {
        const long long v = std::stoll(raw, &used);
        if (used == raw.size()) return static_cast<std::int64_t>(v);
      } else {
        const double v = std::stod(raw, &used);
        if (used == raw.size()) return v;
      }
    } catch (const std::exception&) {
    }
    throw ConfigError(where + ": cannot parse value '" + raw + "' (strings must be quoted)");
  }

  std::map<std::string, Value> values_;
};

/// Typed, strict reader: every key must be consumed before finish().
class KvReader {
 public:
  explicit KvReader(const KvConfig& cfg, std::string origin)
      : cfg_(cfg), origin_(std::move(origin)) {}

  std::string get_string(const std::string& key, std::string fallback) {
    if (auto* v = find(key)) {
      if (auto* s = std::get_if<std::string>(v)) return *s;
      throw ConfigError(origin_ + ": '" + key + "' must be a string");
    }
    return fallback;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) {
    if (auto* v = find(key)) {
      if (auto* i = std::get_if<std::int64_t>(v)) return *i;
      throw ConfigError(origin_ + ": '" + key + "' must be an integer");
    }
    return fallback;
  }

  double get_double(const std::string& key, double fallback) {
    if (auto* v = find(key)) {
      if (auto* d = std::get_if<double>(v)) return *d;
      if (auto* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
      throw ConfigError(origin_ + ": '" + key + "' must be a number");
    }
    return fallback;
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (auto* v = find(key)) {
      if (auto* b = std::get_if<bool>(v)) return *b;
      throw ConfigError(origin_ + ": '" + key + "' must be true or false");
    }
    return fallback;
  }

  /// Throws naming the first key that was never read.
  void finish() const {
    for (const auto& [key, _] : cfg_.values()) {
      if (!used_.count(key)) throw ConfigError(origin_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const KvConfig::Value* find(const std::string& key) {
    used_.insert(key);
    auto it = cfg_.values().find(key);
    return it == cfg_.values().end() ? nullptr : &it->second;
  }

  const KvConfig& cfg_;
  std::string origin_;
  std::set<std::string> used_;
};

}  // namespace medground
