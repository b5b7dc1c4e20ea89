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

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "mlaface/morphable_model.hpp"
#include "mlaface/training.hpp"

namespace mlaface {

inline constexpr int kConfigVersion = 1;

// Either a model file or a seeded synthetic model.
struct ModelSource {
  std::string path;
  std::uint64_t synthetic_seed = 0;
  int synthetic_vertices = 2000;
};

// Declarative run configuration. Sections: version, seed, model, train,
// architecture, loss, camera, embedding. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  ModelSource model;
  TrainConfig train;  // train.seed mirrors seed
};

// Missing sections keep their defaults. Without a camera section the camera
// is centred on the network input with the focal length scaled from
// 1015 px at 224 px.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
// Fully resolved form; parse_run_config(run_config_to_json(c)) reproduces c.
nlohmann::json run_config_to_json(const RunConfig& config);

// Relative model paths are resolved against base_dir.
MorphableModel load_model_source(const ModelSource& source, const std::filesystem::path& base_dir);

}  // namespace mlaface
