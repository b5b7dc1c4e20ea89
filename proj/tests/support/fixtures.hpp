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
#include <random>
#include <string>

#include "mlaface/camera.hpp"
#include "mlaface/morphable_model.hpp"
#include "mlaface/nn/tensor.hpp"

namespace mlaface::testing {

// Shared toy model, built once per test binary.
inline const MorphableModel& toy_model(int vertices = 600, std::uint64_t seed = 11) {
  static const MorphableModel model = synthesize_toy_model(seed, vertices);
  return model;
}

// Camera scaled down from the 224-pixel default.
inline CameraModel small_camera(int size) { return CameraModel::centered(size, size, 1015.0 * size / 224.0); }

inline nn::Tensor random_tensor(int n, int c, int h, int w, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  nn::Tensor t(n, c, h, w);
  for (double& v : t.data()) v = normal(rng);
  return t;
}

// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mlaface_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mlaface::testing
