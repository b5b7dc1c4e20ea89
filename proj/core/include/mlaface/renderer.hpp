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

#include <vector>

#include <Eigen/Core>

#include "mlaface/image.hpp"
#include "mlaface/mesh.hpp"

namespace mlaface {

inline constexpr int kNoTriangle = -1;

enum class CullMode {
  kNone,
  // Drops triangles that appear clockwise on screen (pixel coordinates,
  // y down). With the camera convention in camera.hpp this is exactly the
  // set of triangles whose camera-space normal faces away from the eye,
  // for meshes wound counter-clockwise when seen from outside.
  kBack,
};

struct RasterOptions {
  CullMode cull = CullMode::kBack;
};

// Per-pixel visibility. Pixel (x, y) is sampled at its centre (x + 0.5,
// y + 0.5). Coverage follows the top-left fill rule so that pixels on an
// edge shared by two triangles are owned by exactly one of them. Depth is
// perspective-correct; barycentrics are screen-space and refer to the
// triangle's vertices in their stored order.
struct FragmentBuffers {
  int height = 0;
  int width = 0;
  std::vector<int> triangle;         // H*W, kNoTriangle where empty
  std::vector<double> barycentric;   // H*W*3
  std::vector<double> depth;         // H*W, +inf where empty

  std::size_t pixel(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
  int triangle_at(int y, int x) const { return triangle[pixel(y, x)]; }
};

// Z-buffered rasterization. The nearer fragment wins; exact depth ties go
// to the lower triangle index.
FragmentBuffers rasterize(const Points2& points, const Eigen::VectorXd& depth,
                          const Triangles& triangles, int height, int width,
                          const RasterOptions& options = {});

struct RenderOutput {
  Image image;  // H x W x 3, clamped to [0,1], zero where uncovered
  Image mask;   // H x W x 1, 1 where covered
  Image depth;  // H x W x 1, +inf where uncovered
  std::vector<int> frag_triangle;
  std::vector<double> frag_barycentric;
};

// Rasterizes and interpolates per-vertex colours (Gouraud).
RenderOutput render(const Points2& points, const Eigen::VectorXd& depth, const Triangles& triangles,
                    const Vertices& colors, int height, int width, const RasterOptions& options = {});

struct RenderGradients {
  Vertices colors;  // N x 3
  Points2 points;   // N x 2, interior (fixed coverage) part only
};

// Backward pass of render() for a gradient on the output image. Position
// gradients are taken with the coverage held fixed, so pixels entering or
// leaving a triangle's silhouette contribute nothing.
RenderGradients render_backward(const RenderOutput& output, const Points2& points,
                                const Triangles& triangles, const Vertices& colors,
                                const Image& grad_image);

}  // namespace mlaface
