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
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mlaface/coefficients.hpp"
#include "mlaface/embedding.hpp"
#include "mlaface/face_render.hpp"
#include "mlaface/image.hpp"

namespace mlaface {

struct LossWeights {
  double photometric = 1.9;
  double perceptual = 0.2;
  double landmark = 1.6e-3;
  double coefficient = 3e-4;
  double reflectance = 4.5;
  // Inner weights of the coefficient prior.
  double identity = 1.0;
  double expression = 0.8;
  double texture = 1.7e-2;
  // Landmark weighting: inner-lip points of the 68-point annotation.
  double inner_mouth = 20.0;
  std::vector<int> inner_mouth_indices = {60, 61, 62, 63, 64, 65, 66, 67};

  // Throws a config error for negative weights or bad landmark indices.
  void validate() const;
};

using LandmarkWeights = std::array<double, kNumLandmarks>;
LandmarkWeights landmark_weights(const LossWeights& weights);

// Unweighted terms and the weighted total.
struct LossBreakdown {
  double photometric = 0.0;
  double perceptual = 0.0;
  double landmark = 0.0;
  double coefficient = 0.0;
  double reflectance = 0.0;
  double total = 0.0;
};

LossBreakdown total_loss(double photometric, double perceptual, double landmark, double coefficient,
                         double reflectance, const LossWeights& weights);

struct PhotometricResult {
  double value = 0.0;
  bool empty_coverage = false;  // no pixel with M * A > 0; value is 0
};

// sum_{i in M} A_i ||I_i - R_i||_2 / sum_{i in M} A_i, with the per-pixel
// Euclidean norm over RGB. skin_mask may be null (all ones).
PhotometricResult photometric_loss(const Image& input, const Image& rendered, const Image& render_mask,
                                   const Image* skin_mask);
// Gradient w.r.t. the rendered image. Pixels with I == R get a zero subgradient.
Image photometric_loss_gradient(const Image& input, const Image& rendered, const Image& render_mask,
                                const Image* skin_mask);

// 1 - cos(a, b). Defined as 1 when either embedding is zero.
double perceptual_loss(const Eigen::VectorXd& input_embedding, const Eigen::VectorXd& rendered_embedding);
Eigen::VectorXd perceptual_loss_gradient(const Eigen::VectorXd& input_embedding,
                                         const Eigen::VectorXd& rendered_embedding);

// (1/68) sum_n w_n ||p_n - p'_n||^2, p detected, p' projected.
double landmark_loss(const Landmarks2& detected, const Landmarks2& projected, const LandmarkWeights& weights);
Landmarks2 landmark_loss_gradient(const Landmarks2& detected, const Landmarks2& projected,
                                  const LandmarkWeights& weights);

double coefficient_regularization(const ShapeCoefficients& alpha, const ExpressionCoefficients& beta,
                                  const TextureCoefficients& gamma, const LossWeights& weights);

// Masked albedo variance: sum_i M_i ||T_i - mean||^2 / sum_i M_i with the
// per-channel mean taken over the masked vertices. Throws on an empty mask.
double reflectance_loss(const Vertices& texture, std::span<const std::uint8_t> mask);
Vertices reflectance_loss_gradient(const Vertices& texture, std::span<const std::uint8_t> mask);

struct ObjectiveTarget {
  const Image* image = nullptr;          // H x W x 3 input
  const Landmarks2* landmarks = nullptr; // detected landmarks, pixels
  const Image* skin_mask = nullptr;      // optional H x W x 1
};

struct ObjectiveResult {
  LossBreakdown breakdown;
  bool empty_coverage = false;
  CoefficientArray gradient = CoefficientArray::Zero();  // d(total)/d(coefficients)
  FaceRenderState state;
};

// Full per-image training objective: render the coefficients, score all
// five terms and backpropagate the weighted total onto the coefficients.
// The perceptual term compares the input against the render composited
// over the input outside the rendered face region.
class ReconstructionObjective {
 public:
  ReconstructionObjective(const MorphableModel& model, const CameraModel& camera,
                          const ImageEmbedding& embedding, LossWeights weights);

  ObjectiveResult evaluate(const CoefficientVector& coefficients, const ObjectiveTarget& target,
                           bool with_gradient) const;

  const LossWeights& weights() const { return weights_; }
  const CameraModel& camera() const { return camera_; }

 private:
  const MorphableModel* model_;
  CameraModel camera_;
  const ImageEmbedding* embedding_;
  LossWeights weights_;
  LandmarkWeights landmark_weights_;
};

}  // namespace mlaface
