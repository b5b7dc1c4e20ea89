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

#include "mlaface/camera.hpp"
#include "mlaface/coefficients.hpp"
#include "mlaface/illumination.hpp"
#include "mlaface/morphable_model.hpp"
#include "mlaface/renderer.hpp"

namespace mlaface {

// Intermediate values of coefficients -> image, kept for the backward pass.
struct FaceRenderState {
  CoefficientVector coefficients;
  Eigen::Matrix3d rotation;
  Vertices shape;            // decoded, unposed
  Vertices texture;          // decoded albedo, unclamped
  Vertices normals;          // unposed vertex normals
  Vertices rotated_normals;  // normals in the posed frame, used for lighting
  Vertices shaded;           // per-vertex colour after SH shading
  Vertices posed;
  Projection projection;
  Landmarks2 landmarks;
  RenderOutput render;
};

// decode -> normals -> pose -> shade -> project -> rasterize. Only the
// model's region triangles are drawn; normals use the full topology.
FaceRenderState render_face(const MorphableModel& model, const CoefficientVector& coefficients,
                            const CameraModel& camera, const RasterOptions& options = {});

// Upstream gradients; any may be null.
struct FaceRenderUpstream {
  const Image* image = nullptr;          // w.r.t. the rendered image
  const Landmarks2* landmarks = nullptr; // w.r.t. the projected landmarks
  const Vertices* texture = nullptr;     // w.r.t. the decoded albedo
};

// Gradient w.r.t. the 257 coefficients.
CoefficientArray render_face_backward(const MorphableModel& model, const CameraModel& camera,
                                      const FaceRenderState& state, const FaceRenderUpstream& upstream);

}  // namespace mlaface
