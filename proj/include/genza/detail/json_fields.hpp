#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "genza/error.hpp"

namespace genza::detail {

// Strict reader over one JSON object: every key must be consumed exactly once
// and finish() rejects anything left over. Errors carry the dotted field path.
class FieldReader {
 public:
  FieldReader(const nlohmann::json& obj, std::string path)
      : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) {
      throw ValidationError(path_.empty() ? "<root>" : path_, "expected a JSON object");
    }
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  std::string field_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const nlohmann::json& raw(const std::string& key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) throw ValidationError(field_path(key), "missing required field");
    seen_.insert(key);
    return *it;
  }

  std::uint64_t get_uint(const std::string& key) {
    const auto& v = raw(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_float()) {
      double d = v.get<double>();
      if (d >= 0 && std::floor(d) == d && d < 1.8e19) return static_cast<std::uint64_t>(d);
    }
    throw ValidationError(field_path(key), "expected a non-negative integer");
  }

  double get_number(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_number()) throw ValidationError(field_path(key), "expected a number");
    return v.get<double>();
  }

  bool get_bool(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_boolean()) throw ValidationError(field_path(key), "expected a boolean");
    return v.get<bool>();
  }

  std::string get_string(const std::string& key) {
    const auto& v = raw(key);
    if (!v.is_string()) throw ValidationError(field_path(key), "expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ValidationError(field_path(it.key()), "unknown field");
    }
  }

 private:
  const nlohmann::json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace genza::detail
