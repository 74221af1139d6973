// Copyright 2026 The xcboard Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "xc/error.hpp"

namespace xc {

using json = nlohmann::json;

// Canonical text form: sorted keys (nlohmann::json uses std::map), no
// insignificant whitespace, raw UTF-8.
inline std::string canonical_dump(const json& j) {
  try {
    return j.dump();
  } catch (const json::type_error& e) {
    fail(ErrorCode::schema, std::string("unencodable value: ") + e.what());
  }
}

// 1-based line and column of a byte offset.
inline std::string describe_offset(std::string_view text, std::size_t offset) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline json parse_json(std::string_view text, ErrorCode on_error) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto at = e.byte == 0 ? 0 : e.byte - 1;
    fail(on_error, "parse error at " + describe_offset(text, at));
  }
}

// Field-by-field reader over a JSON object that rejects unknown keys once
// `finish()` is called. `where` is a JSON-pointer-ish path for messages.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where,
               ErrorCode missing = ErrorCode::schema,
               ErrorCode unknown = ErrorCode::unknown_field)
      : j_(j), where_(std::move(where)), missing_(missing), unknown_(unknown) {
    if (!j_.is_object()) fail(missing_, where_ + ": expected object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.emplace_back(key);
    const auto it = j_.find(key);
    if (it == j_.end()) fail(missing_, where_ + ": missing field '" + key + "'");
    return *it;
  }

  std::string str(const char* key) {
    const json& v = raw(key);
    if (!v.is_string()) fail(missing_, where_ + "/" + key + ": expected string");
    return v.get<std::string>();
  }

  std::optional<std::string> opt_str(const char* key) {
    if (!has(key) || j_.at(key).is_null()) {
      seen_.emplace_back(key);
      return std::nullopt;
    }
    return str(key);
  }

  std::uint64_t u64(const char* key) {
    const json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      fail(missing_, where_ + "/" + key + ": expected unsigned integer");
    return v.get<std::uint64_t>();
  }

  std::int64_t i64(const char* key) {
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(missing_, where_ + "/" + key + ": expected integer");
    if (v.is_number_unsigned() &&
        v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
      fail(missing_, where_ + "/" + key + ": integer out of range");
    return v.get<std::int64_t>();
  }

  bool boolean(const char* key) {
    const json& v = raw(key);
    if (!v.is_boolean()) fail(missing_, where_ + "/" + key + ": expected boolean");
    return v.get<bool>();
  }

  const json& array(const char* key) {
    const json& v = raw(key);
    if (!v.is_array()) fail(missing_, where_ + "/" + key + ": expected array");
    return v;
  }

  std::vector<std::string> strings(const char* key) {
    std::vector<std::string> out;
    for (const auto& e : array(key)) {
      if (!e.is_string()) fail(missing_, where_ + "/" + key + ": expected strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      bool known = false;
      for (const auto& s : seen_) known = known || s == k;
      if (!known) fail(unknown_, where_ + ": unknown field '" + k + "'");
    }
  }

  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  ErrorCode missing_;
  ErrorCode unknown_;
  std::vector<std::string> seen_;
};

}  // namespace xc
