#include "geoloc/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "geoloc/errors.hpp"

namespace geoloc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

struct Cursor {
  std::string_view s;
  std::size_t line;

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("config line " + std::to_string(line) + ": " + what);
  }
  void skip_ws() {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  }

  ConfigScalar scalar() {
    skip_ws();
    if (s.empty()) fail("missing value");
    if (s.front() == '"') {
      std::string out;
      s.remove_prefix(1);
      while (!s.empty() && s.front() != '"') {
        char c = s.front();
        s.remove_prefix(1);
        if (c == '\\' && !s.empty()) {
          char e = s.front();
          s.remove_prefix(1);
          switch (e) {
            case 'n': c = '\n'; break;
            case 't': c = '\t'; break;
            default: c = e;
          }
        }
        out += c;
      }
      if (s.empty()) fail("unterminated string");
      s.remove_prefix(1);
      return out;
    }
    if (s.starts_with("true")) {
      s.remove_prefix(4);
      return true;
    }
    if (s.starts_with("false")) {
      s.remove_prefix(5);
      return false;
    }
    std::size_t n = 0;
    while (n < s.size() && (std::isdigit(static_cast<unsigned char>(s[n])) || s[n] == '-' || s[n] == '+' ||
                            s[n] == '.' || s[n] == 'e' || s[n] == 'E' || s[n] == '_'))
      ++n;
    std::string digits;
    for (char c : s.substr(0, n))
      if (c != '_') digits += c;
    double v = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v);
    if (n == 0 || ec != std::errc{} || ptr != digits.data() + digits.size()) fail("cannot parse value");
    s.remove_prefix(n);
    return v;
  }

  ConfigValue value() {
    skip_ws();
    if (!s.empty() && s.front() == '[') {
      s.remove_prefix(1);
      std::vector<ConfigScalar> items;
      skip_ws();
      while (!s.empty() && s.front() != ']') {
        items.push_back(scalar());
        skip_ws();
        if (!s.empty() && s.front() == ',') s.remove_prefix(1);
        skip_ws();
      }
      if (s.empty()) fail("unterminated array");
      s.remove_prefix(1);
      return items;
    }
    return std::visit([](auto&& v) -> ConfigValue { return v; }, scalar());
  }
};

}  // namespace

ConfigTable ConfigTable::parse(std::string_view text) {
  ConfigTable table;
  std::string prefix;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    Cursor cur{line, line_no};
    if (line.front() == '[') {
      auto close = line.find(']');
      if (close == std::string_view::npos) cur.fail("unterminated table header");
      prefix = std::string(trim(line.substr(1, close - 1)));
      if (!prefix.empty()) prefix += '.';
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) cur.fail("expected key = value");
    const std::string_view bare = trim(line.substr(0, eq));
    if (bare.empty()) cur.fail("missing key");
    std::string key = prefix + std::string(bare);
    if (table.values_.contains(key)) cur.fail("duplicate key '" + key + "'");
    cur.s = line.substr(eq + 1);
    ConfigValue v = cur.value();
    cur.skip_ws();
    if (!cur.s.empty() && cur.s.front() != '#') cur.fail("unexpected text after value");
    table.values_[key] = std::move(v);
  }
  return table;
}

ConfigTable ConfigTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<std::string> ConfigTable::string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw DataError("config key '" + key + "' must be a string");
}

std::optional<double> ConfigTable::number(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* d = std::get_if<double>(&it->second)) return *d;
  throw DataError("config key '" + key + "' must be a number");
}

std::optional<bool> ConfigTable::boolean(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* b = std::get_if<bool>(&it->second)) return *b;
  throw DataError("config key '" + key + "' must be true or false");
}

std::optional<std::vector<std::string>> ConfigTable::strings(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* s = std::get_if<std::string>(&it->second)) return std::vector<std::string>{*s};
  std::vector<std::string> out;
  if (auto* arr = std::get_if<std::vector<ConfigScalar>>(&it->second)) {
    for (const auto& item : *arr) {
      auto* s = std::get_if<std::string>(&item);
      if (!s) throw DataError("config key '" + key + "' must be an array of strings");
      out.push_back(*s);
    }
    return out;
  }
  throw DataError("config key '" + key + "' must be an array of strings");
}

std::optional<std::vector<double>> ConfigTable::numbers(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (auto* d = std::get_if<double>(&it->second)) return std::vector<double>{*d};
  std::vector<double> out;
  if (auto* arr = std::get_if<std::vector<ConfigScalar>>(&it->second)) {
    for (const auto& item : *arr) {
      auto* d = std::get_if<double>(&item);
      if (!d) throw DataError("config key '" + key + "' must be an array of numbers");
      out.push_back(*d);
    }
    return out;
  }
  throw DataError("config key '" + key + "' must be an array of numbers");
}

std::vector<std::string> ConfigTable::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

}  // namespace geoloc
