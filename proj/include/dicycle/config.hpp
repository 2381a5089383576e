#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dicycle/errors.hpp"

namespace dicycle {

// Line-oriented `key = value` file with `#` comments. Keys may repeat
// (used for category lines in synthetic specs). Insertion order is kept so
// serialization is deterministic.
class KeyValueFile {
 public:
  static KeyValueFile parse_string(const std::string& text, const std::string& origin = "<string>");
  static KeyValueFile parse_file(const std::string& path);

  bool has(const std::string& key) const;
  // first occurrence; throws ConfigError if absent
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long fallback) const;
  bool get_bool_or(const std::string& key, bool fallback) const;
  std::vector<std::string> get_all(const std::string& key) const;

  void set(const std::string& key, const std::string& value);
  void append(const std::string& key, const std::string& value);
  std::string serialize() const;
  void write_file(const std::string& path) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  // throws ConfigError naming any key not in the allowed set
  void require_known_keys(const std::vector<std::string>& allowed) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::string origin_;
};

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

}  // namespace dicycle
