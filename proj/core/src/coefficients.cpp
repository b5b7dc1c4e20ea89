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

#include "mlaface/coefficients.hpp"

#include <algorithm>
#include <fstream>
#include <vector>

#include "mlaface/error.hpp"

namespace mlaface {

using namespace coefficient_layout;

CoefficientVector split_coefficients(std::span<const double> v) {
  check_size("coefficient vector", static_cast<long long>(v.size()), kCoefficientCount);
  CoefficientVector c;
  c.identity = ShapeCoefficients::from(v.subspan(kIdentityBegin, kIdentityDims));
  c.expression = ExpressionCoefficients::from(v.subspan(kExpressionBegin, kExpressionDims));
  c.texture = TextureCoefficients::from(v.subspan(kTextureBegin, kTextureDims));
  for (int i = 0; i < 3; ++i) {
    c.pose.euler_angles[i] = v[kRotationBegin + i];
    c.pose.translation[i] = v[kTranslationBegin + i];
  }
  c.lighting = SHCoefficients::from(v.subspan(kLightingBegin, kShCoefficients));
  return c;
}

CoefficientArray concat_coefficients(const CoefficientVector& c) {
  CoefficientArray out;
  out.segment<kIdentityDims>(kIdentityBegin) = c.identity.values;
  out.segment<kExpressionDims>(kExpressionBegin) = c.expression.values;
  out.segment<kTextureDims>(kTextureBegin) = c.texture.values;
  out.segment<3>(kRotationBegin) = c.pose.euler_angles;
  out.segment<3>(kTranslationBegin) = c.pose.translation;
  out.segment<kShCoefficients>(kLightingBegin) = c.lighting.values;
  return out;
}

namespace {

template <typename Vec>
std::vector<double> to_vector(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::vector<double> section(const nlohmann::json& j, const char* key, int size) {
  if (!j.contains(key)) throw_data_error("coefficients: missing '{}'", key);
  std::vector<double> v;
  try {
    v = j.at(key).get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw_data_error("coefficients: '{}': {}", key, e.what());
  }
  check_size(key, static_cast<long long>(v.size()), size);
  return v;
}

}  // namespace

nlohmann::json coefficients_to_json(const CoefficientVector& c) {
  return {{"identity", to_vector(c.identity.values)},
          {"expression", to_vector(c.expression.values)},
          {"texture", to_vector(c.texture.values)},
          {"rotation", to_vector(c.pose.euler_angles)},
          {"translation", to_vector(c.pose.translation)},
          {"lighting", to_vector(c.lighting.values)}};
}

CoefficientVector coefficients_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw_data_error("coefficients: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    static const char* const kKeys[] = {"identity", "expression", "texture", "rotation", "translation", "lighting"};
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw_data_error("coefficients: unknown key '{}'", key);
    }
  }
  std::vector<double> all;
  all.reserve(kCoefficientCount);
  for (const auto& [key, size] : {std::pair{"identity", kIdentityDims}, std::pair{"expression", kExpressionDims},
                                  std::pair{"texture", kTextureDims}, std::pair{"rotation", 3},
                                  std::pair{"translation", 3}, std::pair{"lighting", kShCoefficients}}) {
    const auto v = section(j, key, size);
    all.insert(all.end(), v.begin(), v.end());
  }
  return split_coefficients(all);
}

void write_coefficients(const CoefficientVector& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw_data_error("cannot write {}", path.string());
  out << coefficients_to_json(c).dump(2) << '\n';
}

CoefficientVector read_coefficients(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data_error("cannot open coefficients {}", path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw_data_error("{}: invalid JSON: {}", path.string(), e.what());
  }
  return coefficients_from_json(j);
}

}  // namespace mlaface
