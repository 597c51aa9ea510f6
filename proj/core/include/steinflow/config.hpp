#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace steinflow {

/// Flat `section.key = value` configuration. `#` starts a comment; blank
/// lines are ignored; later assignments override earlier ones.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in, const std::string& source = "<input>");
  static Config parse_string(const std::string& text);
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  /// Applies a `key=value` override.
  void apply_override(const std::string& assignment);
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void erase(const std::string& key) { entries_.erase(key); }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma- or whitespace-separated list.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) const;

  /// Throws ConfigError naming the first key outside `allowed`.
  void require_known(const std::set<std::string>& allowed) const;

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  /// Canonical `key = value` lines, sorted by key.
  std::string to_text() const;

 private:
  const std::string* find(const std::string& key) const;
  std::map<std::string, std::string> entries_;
};

}  // namespace steinflow
