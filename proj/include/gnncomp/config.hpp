#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gnncomp/core.hpp"

namespace gnncomp {

/// The TOML subset used by bench configs: [tables] (dotted names allowed),
/// `key = value` with strings, integers, floats, booleans and (possibly
/// multi-line) arrays of those. Inline tables and dates are not supported.
struct TomlValue {
  using Array = std::vector<TomlValue>;
  std::variant<bool, std::int64_t, double, std::string, Array> value;

  bool is_number() const { return std::holds_alternative<std::int64_t>(value) || std::holds_alternative<double>(value); }
  double as_double() const;
  std::int64_t as_int() const;
  bool as_bool() const;
  const std::string& as_string() const;
  const Array& as_array() const;
};

class TomlDocument {
 public:
  /// Keys are fully qualified: "prune.sparsities".
  const TomlValue* find(const std::string& key) const;
  bool contains(const std::string& key) const { return find(key) != nullptr; }
  const std::map<std::string, TomlValue>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_array(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_string_array(const std::string& key, const std::vector<std::string>& fallback) const;

  void set(std::string key, TomlValue value);

 private:
  std::map<std::string, TomlValue> values_;
};

/// Throws ParseError carrying the 1-based line number.
TomlDocument parse_toml(std::string_view text);
TomlDocument load_toml(const std::filesystem::path& path);

}  // namespace gnncomp
