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

#include <span>

#include <Eigen/Core>

#include "mlaface/mesh.hpp"

namespace mlaface {

inline constexpr int kShBands = 9;
inline constexpr int kShCoefficients = 27;

// Second-order spherical-harmonics lighting. Channel-major layout: the 9
// band weights for R, then G, then B.
struct SHCoefficients {
  Eigen::Matrix<double, kShCoefficients, 1> values = Eigen::Matrix<double, kShCoefficients, 1>::Zero();

  static SHCoefficients from(std::span<const double> v);

  double weight(int channel, int band) const { return values[channel * kShBands + band]; }
};

using ShBasis = Eigen::Matrix<double, Eigen::Dynamic, kShBands, Eigen::RowMajor>;

// Real SH normalization constants for bands 0..2.
namespace sh_constants {
inline constexpr double kBand0 = 0.28209479177387814;   // 1 / (2 sqrt(pi))
inline constexpr double kBand1 = 0.48860251190291992;   // sqrt(3 / (4 pi))
inline constexpr double kBand2 = 1.0925484305920792;    // sqrt(15 / (4 pi))
inline constexpr double kBand2Zonal = 0.31539156525252005;  // sqrt(5 / (16 pi))
inline constexpr double kBand2Sq = 0.54627421529603959; // sqrt(15 / (16 pi))
}  // namespace sh_constants

// Area-weighted vertex normals. Zero-area faces contribute nothing; a vertex
// with no non-degenerate incident face gets a zero normal.
Vertices compute_vertex_normals(const Vertices& vertices, const Triangles& triangles);

// Gradient w.r.t. vertex positions given a gradient w.r.t. the normals.
Vertices vertex_normals_backward(const Vertices& vertices, const Triangles& triangles,
                                 const Vertices& grad_normals);

// Columns: Y00, Y1-1 (y), Y10 (z), Y11 (x), Y2-2 (xy), Y2-1 (yz),
// Y20 (3z^2 - 1), Y21 (xz), Y22 (x^2 - y^2).
ShBasis sh_basis(const Vertices& normals);
Vertices sh_basis_backward(const Vertices& normals, const ShBasis& grad_basis);

// Per channel c: out[:, c] = texture[:, c] * (basis * lighting[c]).
Vertices shade_texture(const Vertices& texture, const Vertices& normals, const SHCoefficients& lighting);

struct ShadingGradient {
  Vertices texture;
  Vertices normals;
  SHCoefficients lighting;
};
ShadingGradient shade_texture_backward(const Vertices& texture, const Vertices& normals,
                                       const SHCoefficients& lighting, const Vertices& grad_shaded);

}  // namespace mlaface
