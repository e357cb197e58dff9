#pragma once

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lensgp/errors.hpp"

namespace lensgp::io {

/// Flat `key = value` text with `[section]` headers that prefix keys as
/// `section.key`. '#' starts a comment outside double quotes.
class Config {
public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(std::istream& is, const std::string& source = "<config>") {
    Config c;
    c.source_ = source;
    std::string raw, section;
    int line = 0;
    while (std::getline(is, raw)) {
      ++line;
      std::string s = strip(strip_comment(raw));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') c.fail(line, "unterminated section header");
        section = strip(s.substr(1, s.size() - 2));
        if (section.empty() || !valid_key(section)) c.fail(line, "bad section name '" + section + "'");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) c.fail(line, "expected 'key = value'");
      std::string key = strip(s.substr(0, eq));
      std::string value = strip(s.substr(eq + 1));
      if (key.empty() || !valid_key(key)) c.fail(line, "bad key '" + key + "'");
      if (!section.empty()) key = section + "." + key;
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      if (c.entries_.count(key)) c.fail(line, "duplicate key '" + key + "'");
      c.entries_[key] = {value, line};
      c.order_.push_back(key);
    }
    return c;
  }

  static Config parse_string(const std::string& text, const std::string& source = "<string>") {
    std::istringstream is(text);
    return parse(is, source);
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cli", "cannot open config file " + path);
    return parse(f, path);
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  void set(const std::string& key, const std::string& value) {
    if (!entries_.count(key)) order_.push_back(key);
    entries_[key] = {value, 0};
  }

  std::string get_string(const std::string& key, const std::string& def) const {
    auto it = find(key);
    return it ? it->value : def;
  }

  std::string require_string(const std::string& key) const {
    auto it = find(key);
    if (!it) throw ConfigError("cli", source_ + ": missing required field '" + key + "'");
    return it->value;
  }

  double get_double(const std::string& key, double def) const {
    auto it = find(key);
    return it ? to_double(key, *it) : def;
  }

  long long get_int(const std::string& key, long long def) const {
    auto it = find(key);
    if (!it) return def;
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(it->value.c_str(), &end, 10);
    if (errno || end == it->value.c_str() || *end) field_error(key, *it, "expected an integer");
    return v;
  }

  unsigned long long get_u64(const std::string& key, unsigned long long def) const {
    auto it = find(key);
    if (!it) return def;
    errno = 0;
    char* end = nullptr;
    if (!it->value.empty() && it->value.front() == '-') field_error(key, *it, "expected an unsigned integer");
    const unsigned long long v = std::strtoull(it->value.c_str(), &end, 10);
    if (errno || end == it->value.c_str() || *end) field_error(key, *it, "expected an unsigned integer");
    return v;
  }

  bool get_bool(const std::string& key, bool def) const {
    auto it = find(key);
    if (!it) return def;
    const std::string& v = it->value;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    field_error(key, *it, "expected a boolean");
  }

  std::vector<double> get_list(const std::string& key, const std::vector<double>& def) const {
    auto it = find(key);
    if (!it) return def;
    std::vector<double> out;
    std::stringstream ss(it->value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, {strip(item), it->line}));
    if (out.empty()) field_error(key, *it, "expected a comma separated list of numbers");
    return out;
  }

  /// Keys never read through a getter.
  std::vector<std::string> unused() const {
    std::vector<std::string> u;
    for (const auto& k : order_)
      if (!used_.count(k)) u.push_back(k);
    return u;
  }

  /// Keys in file order with their values.
  std::vector<std::pair<std::string, std::string>> items() const {
    std::vector<std::pair<std::string, std::string>> v;
    for (const auto& k : order_) v.emplace_back(k, entries_.at(k).value);
    return v;
  }

  const std::string& source() const { return source_; }

private:
  const Entry* find(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  double to_double(const std::string& key, const Entry& e) const {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (errno || end == e.value.c_str() || *end) field_error(key, e, "expected a number, got '" + e.value + "'");
    return v;
  }

  [[noreturn]] void field_error(const std::string& key, const Entry& e, const std::string& msg) const {
    throw ConfigError("cli", source_ + ":" + std::to_string(e.line) + ": field '" + key + "': " + msg);
  }

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError("cli", source_ + ":" + std::to_string(line) + ": " + msg);
  }

  static std::string strip(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static bool valid_key(const std::string& k) {
    return std::all_of(k.begin(), k.end(), [](char ch) {
      return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
    });
  }

  std::string source_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
  mutable std::set<std::string> used_;
};

}  // namespace lensgp::io
