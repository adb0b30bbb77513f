/* Copyright 2026 The T3 Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace t3 {

enum class ErrorKind {
  kConfig,     // invalid model or run configuration
  kInput,      // caller supplied out-of-range or malformed input
  kState,      // operation invoked in the wrong state (missing trace, weights)
  kTraining,   // optimisation diverged
  kIngest,     // corpus file could not be parsed
  kIntegrity,  // digest mismatch or incomplete artifact
  kNotFound,
  kGone,
  kBudget,     // live computation refused, retry later
};

inline const char* error_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "config_error";
    case ErrorKind::kInput: return "input_error";
    case ErrorKind::kState: return "state_error";
    case ErrorKind::kTraining: return "training_error";
    case ErrorKind::kIngest: return "ingest_error";
    case ErrorKind::kIntegrity: return "integrity_error";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kGone: return "gone";
    case ErrorKind::kBudget: return "over_budget";
  }
  return "error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  const char* code() const noexcept { return error_code(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) throw Error(kind, message);
}

}  // namespace t3
