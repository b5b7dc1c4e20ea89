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

#include <Eigen/Core>

#include "mlaface/mesh.hpp"
#include "mlaface/morphable_model.hpp"

namespace mlaface {

// Rigid head pose. Angles in radians, applied as intrinsic rotations about
// x (pitch), then y (yaw), then z (roll): R = Rx(pitch) * Ry(yaw) * Rz(roll).
// Translation in model units (millimetres).
struct Pose {
  Eigen::Vector3d euler_angles = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Pinhole camera looking at the model origin from +z at camera_distance.
// Model space is x right, y up, z towards the viewer; camera space is
// x right, y down, z forward, i.e. p_cam = (x, -y, camera_distance - z).
struct CameraModel {
  double focal_length = 1015.0;  // pixels
  int height = 224;
  int width = 224;
  Eigen::Vector2d principal_point{112.0, 112.0};
  double camera_distance = 1000.0;  // millimetres

  // Camera with the principal point at the image centre.
  static CameraModel centered(int height, int width, double focal_length, double camera_distance = 1000.0);

  // Throws a config error when focal_length <= 0 or the image is empty.
  void validate() const;
};

Eigen::Matrix3d euler_to_rotation(const Eigen::Vector3d& angles);

// Partial derivatives dR/d(angle_k), k = 0..2.
std::array<Eigen::Matrix3d, 3> euler_to_rotation_derivatives(const Eigen::Vector3d& angles);

// Pulls a gradient on the rotation matrix entries back onto the angles.
Eigen::Vector3d euler_backward(const Eigen::Vector3d& angles, const Eigen::Matrix3d& grad_rotation);

// Inverse of euler_to_rotation for the fixed convention, all angles in
// (-pi, pi]; yaw in [-pi/2, pi/2].
Eigen::Vector3d rotation_to_euler(const Eigen::Matrix3d& rotation);

struct Projection {
  Points2 points;         // N x 2 pixel coordinates
  Eigen::VectorXd depth;  // N camera-space depths, > 0
  Vertices camera_points; // N x 3 camera-space coordinates
};

// v = R * s + t for every row.
Vertices transform_vertices(const Vertices& vertices, const Pose& pose);

// Projects posed model-space points. Throws a numeric error naming how many
// points are not in front of the camera.
Projection project_points(const Vertices& posed, const CameraModel& camera);

Projection transform_and_project(const Vertices& vertices, const Pose& pose,
                                 const CameraModel& camera);

// Gradient of a loss w.r.t. the posed points given its gradient w.r.t.
// the pixel coordinates (and optionally depth).
Vertices project_backward(const Projection& projection, const CameraModel& camera,
                          const Points2& grad_points, const Eigen::VectorXd* grad_depth = nullptr);

struct PoseGradient {
  Vertices vertices;  // w.r.t. the unposed input vertices
  Eigen::Vector3d euler_angles = Eigen::Vector3d::Zero();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Backward through v = R * s + t.
PoseGradient transform_backward(const Vertices& vertices, const Pose& pose,
                                const Vertices& grad_posed);

// Recovers the posed point from a pixel and a camera-space depth.
Eigen::Vector3d unproject(const Eigen::Vector2d& pixel, double depth, const CameraModel& camera);

struct CoefficientVector;

// decode_shape -> select_landmarks -> transform_and_project.
Landmarks2 project_landmarks(const MorphableModel& model, const CoefficientVector& coefficients,
                             const CameraModel& camera);

}  // namespace mlaface
