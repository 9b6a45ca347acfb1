#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace brc {

/**
 * Flat `key = value` text configuration.
 *
 * Lines starting with `#` are comments; blank lines are ignored. Keys are
 * unique. The same format is used for run configs, model specs and the
 * simulator's truth manifest.
 */
class FlatConfig {
 public:
  FlatConfig() = default;

  static FlatConfig parse(const std::string& text);
  static FlatConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::string require(const std::string& key) const;
  double require_double(const std::string& key) const;

  /// Throws ConfigError naming the first key not in `allowed` (prefix match
  /// when an allowed entry ends in '.').
  void reject_unknown(const std::set<std::string>& allowed) const;

  /// Keys beginning with `prefix`, in sorted order.
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string to_string() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> entries_;
};

/// Formats a double so that parsing it back gives the identical value.
std::string format_double(double v);

/// Writes `content` to `path` via a temporary sibling and an atomic rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace brc
