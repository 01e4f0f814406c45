#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "surgecast/error.hpp"
#include "surgecast/text.hpp"

namespace surgecast {

/// Plain `key=value` configuration. `#` starts a comment; later keys win.
class KeyValueConfig {
 public:
  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open config: " + path.string());
    KeyValueConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto body = text::trim(std::string_view(line).substr(0, line.find('#')));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorKind::parse, path.string() + ":" + std::to_string(line_no) + ": expected key=value");
      }
      cfg.set(std::string(text::trim(body.substr(0, eq))), std::string(text::trim(body.substr(eq + 1))));
    }
    return cfg;
  }

  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Throws when a key is not in `known`.
  void check_keys(const std::set<std::string>& known) const {
    for (const auto& [k, v] : values_) {
      if (!known.count(k)) throw Error(ErrorKind::config, "unknown config key '" + k + "'");
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) const {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    if constexpr (std::is_same_v<T, std::string>) {
      out = it->second;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (it->second == "true" || it->second == "1") out = true;
      else if (it->second == "false" || it->second == "0") out = false;
      else throw Error(ErrorKind::config, "config '" + key + "': expected true/false");
    } else {
      if (!text::parse_number(it->second, out)) {
        throw Error(ErrorKind::config, "config '" + key + "': cannot parse '" + it->second + "'");
      }
    }
  }

  void read_list(const std::string& key, std::vector<std::size_t>& out) const {
    auto it = values_.find(key);
    if (it == values_.end()) return;
    out = parse_size_list(it->second, key);
  }

  static std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& what) {
    std::vector<std::size_t> out;
    for (const auto& part : text::split(s, ',')) {
      std::size_t v = 0;
      if (!text::parse_number(text::trim(part), v)) {
        throw Error(ErrorKind::config, what + ": cannot parse list '" + s + "'");
      }
      out.push_back(v);
    }
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
  }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace surgecast
