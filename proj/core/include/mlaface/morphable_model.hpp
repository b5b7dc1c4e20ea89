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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mlaface/container.hpp"
#include "mlaface/error.hpp"
#include "mlaface/mesh.hpp"

namespace mlaface {

inline constexpr int kIdentityDims = 80;
inline constexpr int kExpressionDims = 64;
inline constexpr int kTextureDims = 80;
inline constexpr int kNumLandmarks = 68;

// Fixed-length PCA weight vector. The tag keeps identity and texture
// coefficients (both 80-dimensional) from being mixed up.
template <int Dims, typename Tag>
struct Coefficients {
  static constexpr int kDims = Dims;
  Eigen::Matrix<double, Dims, 1> values = Eigen::Matrix<double, Dims, 1>::Zero();

  static Coefficients zero() { return {}; }

  static Coefficients from(std::span<const double> v) {
    check_size(Tag::kName, static_cast<long long>(v.size()), Dims);
    Coefficients c;
    for (int i = 0; i < Dims; ++i) c.values[i] = v[static_cast<std::size_t>(i)];
    return c;
  }
};

struct ShapeTag { static constexpr const char* kName = "identity coefficients"; };
struct ExpressionTag { static constexpr const char* kName = "expression coefficients"; };
struct TextureTag { static constexpr const char* kName = "texture coefficients"; };

using ShapeCoefficients = Coefficients<kIdentityDims, ShapeTag>;
using ExpressionCoefficients = Coefficients<kExpressionDims, ExpressionTag>;
using TextureCoefficients = Coefficients<kTextureDims, TextureTag>;

using Landmarks3 = Eigen::Matrix<double, kNumLandmarks, 3, Eigen::RowMajor>;
using Landmarks2 = Eigen::Matrix<double, kNumLandmarks, 2, Eigen::RowMajor>;

// Raw fields, validated when wrapped into a MorphableModel.
struct MorphableModelData {
  Eigen::VectorXd mean_shape;    // 3N, millimetres, xyz interleaved
  Eigen::VectorXd mean_texture;  // 3N, RGB in [0,1]
  Eigen::MatrixXd basis_id;      // 3N x 80
  Eigen::MatrixXd basis_exp;     // 3N x 64
  Eigen::MatrixXd basis_tex;     // 3N x 80
  Triangles triangles;           // F x 3
  std::array<int, kNumLandmarks> landmark_indices{};
  int nose_tip_index = 0;
  // 1 for vertices that belong to the reconstructed face region (ear and
  // neck vertices of a full head model are 0).
  std::vector<std::uint8_t> region_mask;
};

// Linear statistical face model. Immutable after construction.
class MorphableModel {
 public:
  explicit MorphableModel(MorphableModelData data);

  int num_vertices() const { return static_cast<int>(data_.mean_shape.size() / 3); }
  int num_triangles() const { return static_cast<int>(data_.triangles.rows()); }

  const Eigen::VectorXd& mean_shape() const { return data_.mean_shape; }
  const Eigen::VectorXd& mean_texture() const { return data_.mean_texture; }
  const Eigen::MatrixXd& basis_id() const { return data_.basis_id; }
  const Eigen::MatrixXd& basis_exp() const { return data_.basis_exp; }
  const Eigen::MatrixXd& basis_tex() const { return data_.basis_tex; }
  const Triangles& triangles() const { return data_.triangles; }
  const std::array<int, kNumLandmarks>& landmark_indices() const { return data_.landmark_indices; }
  int nose_tip_index() const { return data_.nose_tip_index; }
  const std::vector<std::uint8_t>& region_mask() const { return data_.region_mask; }

  // Triangles whose three vertices all lie inside the region mask.
  const Triangles& region_triangles() const { return region_triangles_; }

  const MorphableModelData& data() const { return data_; }

 private:
  MorphableModelData data_;
  Triangles region_triangles_;
};

// S = mean + A_id * alpha + A_exp * beta, as N x 3.
Vertices decode_shape(const MorphableModel& model, const ShapeCoefficients& alpha,
                      const ExpressionCoefficients& beta);

// T = mean + A_tex * gamma, as N x 3. Not clamped.
Vertices decode_texture(const MorphableModel& model, const TextureCoefficients& gamma);

// Chain rule through the linear decoders: pulls an N x 3 gradient on the
// decoded array back onto the coefficients.
struct ShapeGradient {
  ShapeCoefficients alpha;
  ExpressionCoefficients beta;
};
ShapeGradient decode_shape_backward(const MorphableModel& model, const Vertices& grad_shape);
TextureCoefficients decode_texture_backward(const MorphableModel& model,
                                            const Vertices& grad_texture);

// Row i of the result is vertices.row(indices[i]).
Landmarks3 select_landmarks(const Vertices& vertices, std::span<const int> indices);
Landmarks3 select_landmarks(const Vertices& vertices, const MorphableModel& model);

// Deterministic desk-scale stand-in for a licensed face model: a closed
// genus-0 deformed sphere with orthonormal random bases.
MorphableModel synthesize_toy_model(std::uint64_t seed, int n_vertices);

void save_model(const MorphableModel& model, const std::filesystem::path& path);
MorphableModel load_model(const std::filesystem::path& path);

// Array-level (de)serialization shared with checkpoints.
void store_model(const MorphableModel& model, ArrayContainer& container);
MorphableModel restore_model(const ArrayContainer& container);

// Decoded mesh with per-vertex texture colours, suitable for OBJ export.
TriangleMesh model_mesh(const MorphableModel& model, const Vertices& shape,
                        const Vertices& colors);

}  // namespace mlaface
