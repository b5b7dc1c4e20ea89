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

#include "mlaface/camera.hpp"

#include <algorithm>
#include <cmath>

#include "mlaface/coefficients.hpp"
#include "mlaface/error.hpp"

namespace mlaface {

namespace {

Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}
Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}
Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}
Eigen::Matrix3d d_rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return r;
}
Eigen::Matrix3d d_rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return r;
}
Eigen::Matrix3d d_rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return r;
}

}  // namespace

CameraModel CameraModel::centered(int height, int width, double focal_length, double camera_distance) {
  CameraModel cam;
  cam.height = height;
  cam.width = width;
  cam.focal_length = focal_length;
  cam.principal_point = {width / 2.0, height / 2.0};
  cam.camera_distance = camera_distance;
  return cam;
}

void CameraModel::validate() const {
  if (!(focal_length > 0.0)) throw_config_error("camera focal_length must be > 0, got {}", focal_length);
  if (height <= 0 || width <= 0) throw_config_error("camera image size must be positive, got {}x{}", height, width);
  if (!std::isfinite(camera_distance)) throw_config_error("camera_distance must be finite");
}

Eigen::Matrix3d euler_to_rotation(const Eigen::Vector3d& angles) {
  return rot_x(angles.x()) * rot_y(angles.y()) * rot_z(angles.z());
}

std::array<Eigen::Matrix3d, 3> euler_to_rotation_derivatives(const Eigen::Vector3d& a) {
  const Eigen::Matrix3d rx = rot_x(a.x()), ry = rot_y(a.y()), rz = rot_z(a.z());
  return {d_rot_x(a.x()) * ry * rz, rx * d_rot_y(a.y()) * rz, rx * ry * d_rot_z(a.z())};
}

Eigen::Vector3d euler_backward(const Eigen::Vector3d& angles, const Eigen::Matrix3d& grad_rotation) {
  const auto d = euler_to_rotation_derivatives(angles);
  return {d[0].cwiseProduct(grad_rotation).sum(), d[1].cwiseProduct(grad_rotation).sum(),
          d[2].cwiseProduct(grad_rotation).sum()};
}

Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& r) {
  const double yaw = std::asin(std::clamp(r(0, 2), -1.0, 1.0));
  return {std::atan2(-r(1, 2), r(2, 2)), yaw, std::atan2(-r(0, 1), r(0, 0))};
}

Vertices transform_vertices(const Vertices& vertices, const Pose& pose) {
  const Eigen::Matrix3d r = euler_to_rotation(pose.euler_angles);
  Vertices out = vertices * r.transpose();
  out.rowwise() += pose.translation.transpose();
  return out;
}

Projection project_points(const Vertices& posed, const CameraModel& camera) {
  const Eigen::Index n = posed.rows();
  Projection p;
  p.camera_points.resize(n, 3);
  p.camera_points.col(0) = posed.col(0);
  p.camera_points.col(1) = -posed.col(1);
  p.camera_points.col(2) = (camera.camera_distance - posed.col(2).array()).matrix();
  p.depth = p.camera_points.col(2);
  const Eigen::Index behind = (p.depth.array() <= 0.0 || !p.depth.array().isFinite()).count();
  if (behind > 0) {
    throw_numeric_error("{} of {} vertices are not in front of the camera (non-positive depth)",
                        behind, n);
  }
  p.points.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double inv_z = 1.0 / p.depth[i];
    p.points(i, 0) = camera.focal_length * p.camera_points(i, 0) * inv_z + camera.principal_point.x();
    p.points(i, 1) = camera.focal_length * p.camera_points(i, 1) * inv_z + camera.principal_point.y();
  }
  return p;
}

Projection transform_and_project(const Vertices& vertices, const Pose& pose,
                                 const CameraModel& camera) {
  return project_points(transform_vertices(vertices, pose), camera);
}

Vertices project_backward(const Projection& projection, const CameraModel& camera,
                          const Points2& grad_points, const Eigen::VectorXd* grad_depth) {
  const Eigen::Index n = projection.points.rows();
  check_size("projected point gradient rows", grad_points.rows(), n);
  Vertices grad(n, 3);
  const double f = camera.focal_length;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = projection.camera_points(i, 0);
    const double y = projection.camera_points(i, 1);
    const double inv_z = 1.0 / projection.depth[i];
    const double gu = grad_points(i, 0), gv = grad_points(i, 1);
    const double g_cx = gu * f * inv_z;
    const double g_cy = gv * f * inv_z;
    double g_cz = -(gu * f * x + gv * f * y) * inv_z * inv_z;
    if (grad_depth) g_cz += (*grad_depth)[i];
    // p_cam = (x, -y, d - z)
    grad(i, 0) = g_cx;
    grad(i, 1) = -g_cy;
    grad(i, 2) = -g_cz;
  }
  return grad;
}

PoseGradient transform_backward(const Vertices& vertices, const Pose& pose,
                                const Vertices& grad_posed) {
  check_size("posed vertex gradient rows", grad_posed.rows(), vertices.rows());
  const Eigen::Matrix3d r = euler_to_rotation(pose.euler_angles);
  PoseGradient g;
  g.vertices = grad_posed * r;
  const Eigen::Matrix3d grad_r = grad_posed.transpose() * vertices;
  g.euler_angles = euler_backward(pose.euler_angles, grad_r);
  g.translation = grad_posed.colwise().sum().transpose();
  return g;
}

Eigen::Vector3d unproject(const Eigen::Vector2d& pixel, double depth, const CameraModel& camera) {
  const double x = (pixel.x() - camera.principal_point.x()) * depth / camera.focal_length;
  const double y = (pixel.y() - camera.principal_point.y()) * depth / camera.focal_length;
  return {x, -y, camera.camera_distance - depth};
}

Landmarks2 project_landmarks(const MorphableModel& model, const CoefficientVector& coefficients,
                             const CameraModel& camera) {
  const Vertices shape = decode_shape(model, coefficients.identity, coefficients.expression);
  const Landmarks3 lm3 = select_landmarks(shape, model);
  const Vertices lm_vertices = lm3;
  const Projection p = transform_and_project(lm_vertices, coefficients.pose, camera);
  return p.points;
}

}  // namespace mlaface
