// Copyright 2026 The mlaface Authors
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

#include <fmt/format.h>

namespace mlaface {

// Coarse failure classes. The command line tool maps these onto exit codes.
enum class ErrorKind {
  kConfig,   // bad configuration or flag values
  kData,     // malformed, missing or inconsistent input data
  kNumeric,  // numeric failure during computation (e.g. vertex behind camera)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <typename... Args>
[[noreturn]] void throw_config_error(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(ErrorKind::kConfig, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void throw_data_error(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(ErrorKind::kData, fmt::format(f, std::forward<Args>(args)...));
}

template <typename... Args>
[[noreturn]] void throw_numeric_error(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(ErrorKind::kNumeric, fmt::format(f, std::forward<Args>(args)...));
}

// Rejects a size mismatch with both sizes in the message.
inline void check_size(const char* what, long long actual, long long expected) {
  if (actual != expected) {
    throw_data_error("{}: expected size {}, got {}", what, expected, actual);
  }
}

}  // namespace mlaface
