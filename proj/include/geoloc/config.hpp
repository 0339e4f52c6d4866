#pragma once

// A small reader for the flat TOML subset used by experiment configs:
// `key = value` lines, `#` comments, optional `[table]` headers (keys become
// "table.key"), and values that are strings, numbers, booleans, or
// single-line arrays of those.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace geoloc {

using ConfigScalar = std::variant<std::string, double, bool>;
using ConfigValue = std::variant<std::string, double, bool, std::vector<ConfigScalar>>;

class ConfigTable {
 public:
  static ConfigTable parse(std::string_view text);
  static ConfigTable load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.contains(key); }
  std::optional<std::string> string(const std::string& key) const;
  std::optional<double> number(const std::string& key) const;
  std::optional<bool> boolean(const std::string& key) const;
  std::optional<std::vector<std::string>> strings(const std::string& key) const;
  std::optional<std::vector<double>> numbers(const std::string& key) const;
  std::vector<std::string> keys() const;

 private:
  std::map<std::string, ConfigValue> values_;
};

}  // namespace geoloc
