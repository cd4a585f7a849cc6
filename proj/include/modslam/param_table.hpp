#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "modslam/geometry.hpp"

namespace modslam {

/// One configuration value. Arrays are numeric only.
using ConfigValue = std::variant<bool, std::int64_t, double, std::string, std::vector<double>>;
using ParamTable = std::map<std::string, ConfigValue>;

/// Typed reads from a table; every getter throws ConfigError naming
/// `where.key` on a type mismatch. Integers are accepted where a double is
/// expected.
class ParamReader {
 public:
  ParamReader(const ParamTable& table, std::string where) : table_(table), where_(std::move(where)) {}

  bool has(const std::string& key) const { return table_.count(key) != 0; }
  double number(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
  Vec3 vec3(const std::string& key, const Vec3& fallback) const;

  /// Throws ConfigError naming the first key not in `known`.
  void reject_unknown(const std::vector<std::string>& known) const;

 private:
  std::string qualified(const std::string& key) const { return where_ + "." + key; }
  const ParamTable& table_;
  std::string where_;
};

std::string type_name(const ConfigValue& v);

}  // namespace modslam
