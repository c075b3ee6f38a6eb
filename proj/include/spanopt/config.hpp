#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace spanopt {

/// Flat "key = value" text with dotted section names ("span.l = 16"). Blank
/// lines and text after '#' are ignored. Getters throw ConfigError on a value
/// that does not convert; `unused_keys` lists keys nobody asked for.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, std::string value);

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::size_t> get_size(const std::string& key) const;
  std::optional<std::uint64_t> get_u64(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  /// Comma-separated list; an empty value gives an empty list.
  std::optional<std::vector<std::string>> get_list(const std::string& key) const;
  std::optional<std::vector<double>> get_double_list(const std::string& key) const;

  std::vector<std::string> unused_keys() const;

 private:
  const std::string* lookup(const std::string& key) const;

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace spanopt
