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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mlaface/morphable_model.hpp"

namespace mlaface {

// 68 lines of "x y" in pixels. Throws a data error on a missing file, a
// wrong line count or a non-finite value.
Landmarks2 read_landmarks(const std::filesystem::path& path);
void write_landmarks(const Landmarks2& landmarks, const std::filesystem::path& path);

// One JSON object per non-empty line. Throws a data error naming the
// offending line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

// Relative paths in a manifest are resolved against the manifest directory.
std::filesystem::path resolve_path(const std::filesystem::path& manifest, const std::string& entry);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace mlaface
