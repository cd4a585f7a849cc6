#include "modslam/param_table.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "modslam/errors.hpp"

namespace modslam {

std::string type_name(const ConfigValue& v) {
  static const char* names[] = {"boolean", "integer", "float", "string", "array"};
  return names[v.index()];
}

namespace {

[[noreturn]] void mismatch(const std::string& key, const char* want, const ConfigValue& got) {
  throw ConfigError(fmt::format("{}: expected {}, got {}", key, want, type_name(got)));
}

}  // namespace

double ParamReader::number(const std::string& key, double fallback) const {
  auto it = table_.find(key);
  if (it == table_.end()) return fallback;
  if (auto* d = std::get_if<double>(&it->second)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  mismatch(qualified(key), "number", it->second);
}

std::int64_t ParamReader::integer(const std::string& key, std::int64_t fallback) const {
  auto it = table_.find(key);
  if (it == table_.end()) return fallback;
  if (auto* i = std::get_if<std::int64_t>(&it->second)) return *i;
  mismatch(qualified(key), "integer", it->second);
}

bool ParamReader::boolean(const std::string& key, bool fallback) const {
  auto it = table_.find(key);
  if (it == table_.end()) return fallback;
  if (auto* b = std::get_if<bool>(&it->second)) return *b;
  mismatch(qualified(key), "boolean", it->second);
}

std::string ParamReader::string(const std::string& key, const std::string& fallback) const {
  auto it = table_.find(key);
  if (it == table_.end()) return fallback;
  if (auto* s = std::get_if<std::string>(&it->second)) return *s;
  mismatch(qualified(key), "string", it->second);
}

std::vector<double> ParamReader::numbers(const std::string& key,
                                         const std::vector<double>& fallback) const {
  auto it = table_.find(key);
  if (it == table_.end()) return fallback;
  if (auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
  mismatch(qualified(key), "array", it->second);
}

Vec3 ParamReader::vec3(const std::string& key, const Vec3& fallback) const {
  if (!has(key)) return fallback;
  const auto v = numbers(key, {});
  if (v.size() != 3) {
    throw ConfigError(fmt::format("{}: expected 3 numbers, got {}", qualified(key), v.size()));
  }
  return Vec3(v[0], v[1], v[2]);
}

void ParamReader::reject_unknown(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : table_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(fmt::format("unknown key '{}'", qualified(key)));
    }
  }
}

}  // namespace modslam
