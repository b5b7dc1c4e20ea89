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

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "mlaface/error.hpp"

namespace mlaface {

// Throws a config error unless j is an object whose keys all appear in allowed.
inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const char* section) {
  if (!j.is_object()) throw_config_error("{} must be a JSON object", section);
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw_config_error("unknown key '{}' in {}", key, section);
  }
}

// Overwrites out with j[key] when present; type mismatches are config errors.
template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw_config_error("bad value for '{}': {}", key, e.what());
  }
}

}  // namespace mlaface
