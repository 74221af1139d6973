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

#include <stdexcept>
#include <string>
#include <string_view>

namespace xc {

// Error codes double as the `err` field of protocol error frames, so the
// string forms are part of the wire contract.
enum class ErrorCode {
  malformed,
  unknown_type,
  unknown_field,
  version_mismatch,
  schema,
  parse,
  duplicate_id,
  unknown_id,
  invalid_argument,
  out_of_range,
  unknown_session,
  unknown_participant,
  unknown_target,
  invalid_body,
  phase,
  illegal_transition,
  forbidden,
  rate_limited,
  capacity,
  conflict,
  payload_too_large,
  not_found,
  integrity,
  corrupt_log,
  storage,
  io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::malformed: return "malformed";
    case ErrorCode::unknown_type: return "unknown_type";
    case ErrorCode::unknown_field: return "unknown_field";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::schema: return "schema";
    case ErrorCode::parse: return "parse";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::unknown_id: return "unknown_id";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::unknown_session: return "unknown_session";
    case ErrorCode::unknown_participant: return "unknown_participant";
    case ErrorCode::unknown_target: return "unknown_target";
    case ErrorCode::invalid_body: return "invalid_body";
    case ErrorCode::phase: return "phase";
    case ErrorCode::illegal_transition: return "illegal_transition";
    case ErrorCode::forbidden: return "forbidden";
    case ErrorCode::rate_limited: return "rate_limited";
    case ErrorCode::capacity: return "capacity";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::payload_too_large: return "payload_too_large";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::integrity: return "integrity";
    case ErrorCode::corrupt_log: return "corrupt_log";
    case ErrorCode::storage: return "storage";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace xc
