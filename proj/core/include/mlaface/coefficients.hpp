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
#include <span>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "mlaface/camera.hpp"
#include "mlaface/illumination.hpp"
#include "mlaface/morphable_model.hpp"

namespace mlaface {

// Layout of the regressed vector x = [alpha_id, beta_exp, gamma_tex,
// rotation, translation, delta_lig].
namespace coefficient_layout {
inline constexpr int kIdentityBegin = 0;
inline constexpr int kExpressionBegin = kIdentityBegin + kIdentityDims;      // 80
inline constexpr int kTextureBegin = kExpressionBegin + kExpressionDims;     // 144
inline constexpr int kRotationBegin = kTextureBegin + kTextureDims;          // 224
inline constexpr int kTranslationBegin = kRotationBegin + 3;                 // 227
inline constexpr int kLightingBegin = kTranslationBegin + 3;                 // 230
inline constexpr int kTotal = kLightingBegin + kShCoefficients;              // 257
}  // namespace coefficient_layout

inline constexpr int kCoefficientCount = coefficient_layout::kTotal;
static_assert(kCoefficientCount == 257);

using CoefficientArray = Eigen::Matrix<double, kCoefficientCount, 1>;

struct CoefficientVector {
  ShapeCoefficients identity;
  ExpressionCoefficients expression;
  TextureCoefficients texture;
  Pose pose;  // rotation in radians, translation in millimetres
  SHCoefficients lighting;
};

// Throws a data error unless v has exactly 257 entries.
CoefficientVector split_coefficients(std::span<const double> v);
CoefficientArray concat_coefficients(const CoefficientVector& c);

// Named sections: identity, expression, texture, rotation, translation,
// lighting. Values round-trip exactly.
nlohmann::json coefficients_to_json(const CoefficientVector& c);
CoefficientVector coefficients_from_json(const nlohmann::json& j);
void write_coefficients(const CoefficientVector& c, const std::filesystem::path& path);
CoefficientVector read_coefficients(const std::filesystem::path& path);

}  // namespace mlaface
