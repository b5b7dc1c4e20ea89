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

#include "mlaface/face_render.hpp"

namespace mlaface {

using namespace coefficient_layout;

FaceRenderState render_face(const MorphableModel& model, const CoefficientVector& coefficients,
                            const CameraModel& camera, const RasterOptions& options) {
  camera.validate();
  FaceRenderState s;
  s.coefficients = coefficients;
  s.rotation = euler_to_rotation(coefficients.pose.euler_angles);
  s.shape = decode_shape(model, coefficients.identity, coefficients.expression);
  s.texture = decode_texture(model, coefficients.texture);
  s.normals = compute_vertex_normals(s.shape, model.triangles());
  s.rotated_normals = s.normals * s.rotation.transpose();
  s.shaded = shade_texture(s.texture, s.rotated_normals, coefficients.lighting);
  s.posed = transform_vertices(s.shape, coefficients.pose);
  s.projection = project_points(s.posed, camera);
  for (int i = 0; i < kNumLandmarks; ++i) {
    s.landmarks.row(i) = s.projection.points.row(model.landmark_indices()[static_cast<std::size_t>(i)]);
  }
  s.render = render(s.projection.points, s.projection.depth, model.region_triangles(), s.shaded,
                    camera.height, camera.width, options);
  return s;
}

CoefficientArray render_face_backward(const MorphableModel& model, const CameraModel& camera,
                                      const FaceRenderState& s, const FaceRenderUpstream& up) {
  const Eigen::Index n = s.shape.rows();
  Vertices grad_shaded = Vertices::Zero(n, 3);
  Points2 grad_points = Points2::Zero(n, 2);
  if (up.image) {
    const RenderGradients rg =
        render_backward(s.render, s.projection.points, model.region_triangles(), s.shaded, *up.image);
    grad_shaded = rg.colors;
    grad_points = rg.points;
  }
  if (up.landmarks) {
    for (int i = 0; i < kNumLandmarks; ++i) {
      grad_points.row(model.landmark_indices()[static_cast<std::size_t>(i)]) += up.landmarks->row(i);
    }
  }

  const ShadingGradient sg =
      shade_texture_backward(s.texture, s.rotated_normals, s.coefficients.lighting, grad_shaded);
  Vertices grad_texture = sg.texture;
  if (up.texture) grad_texture += *up.texture;

  // posed = shape * R^T + t ; rotated_normals = normals * R^T.
  const Vertices grad_posed = project_backward(s.projection, camera, grad_points);
  const Eigen::Matrix3d grad_rotation =
      grad_posed.transpose() * s.shape + sg.normals.transpose() * s.normals;
  Vertices grad_shape = grad_posed * s.rotation;
  const Vertices grad_normals = sg.normals * s.rotation;
  grad_shape += vertex_normals_backward(s.shape, model.triangles(), grad_normals);

  const ShapeGradient shape_grad = decode_shape_backward(model, grad_shape);
  CoefficientArray g;
  g.segment<kIdentityDims>(kIdentityBegin) = shape_grad.alpha.values;
  g.segment<kExpressionDims>(kExpressionBegin) = shape_grad.beta.values;
  g.segment<kTextureDims>(kTextureBegin) = decode_texture_backward(model, grad_texture).values;
  g.segment<3>(kRotationBegin) = euler_backward(s.coefficients.pose.euler_angles, grad_rotation);
  g.segment<3>(kTranslationBegin) = grad_posed.colwise().sum().transpose();
  g.segment<kShCoefficients>(kLightingBegin) = sg.lighting.values;
  return g;
}

}  // namespace mlaface
