#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace kcs {

/// Flat `key = value` configuration file. Lines starting with '#' and blank
/// lines are ignored. Keys are dotted lowercase (e.g. "train.batch_size").
class KeyValueConfig {
public:
  KeyValueConfig() = default;
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set_double(const std::string& key, double value);
  void set_int(const std::string& key, long long value);
  void set_bool(const std::string& key, bool value);

  /// Sorted-key echo of every effective value.
  void write(const std::filesystem::path& path) const;

private:
  std::map<std::string, std::string> values_;
};

}  // namespace kcs
