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

#include "mlaface/losses.hpp"

#include <cmath>

#include "mlaface/error.hpp"

namespace mlaface {

using namespace coefficient_layout;

namespace {

void check_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw_data_error("{}: {}x{} vs {}x{}", what, a.height(), a.width(), b.height(), b.width());
  }
}

double pixel_weight(const Image& render_mask, const Image* skin_mask, int y, int x) {
  if (render_mask.at(y, x) == 0.0) return 0.0;
  return skin_mask ? skin_mask->at(y, x) : 1.0;
}

double masked_sum(std::span<const std::uint8_t> mask) {
  double s = 0.0;
  for (auto m : mask) s += m;
  return s;
}

Eigen::RowVector3d masked_mean(const Vertices& texture, std::span<const std::uint8_t> mask) {
  Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
  for (Eigen::Index i = 0; i < texture.rows(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) mean += texture.row(i);
  }
  return mean / masked_sum(mask);
}

void check_mask(const Vertices& texture, std::span<const std::uint8_t> mask) {
  check_size("reflectance mask", static_cast<long long>(mask.size()), texture.rows());
  if (masked_sum(mask) == 0.0) throw_data_error("reflectance loss: mask selects no vertices");
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {photometric, perceptual, landmark, coefficient, reflectance, identity, expression,
                   texture, inner_mouth}) {
    if (!(w >= 0.0)) throw_config_error("loss weights must be >= 0, got {}", w);
  }
  for (int i : inner_mouth_indices) {
    if (i < 0 || i >= kNumLandmarks) throw_config_error("inner mouth landmark index {} outside [0, 68)", i);
  }
}

LandmarkWeights landmark_weights(const LossWeights& weights) {
  LandmarkWeights w;
  w.fill(1.0);
  for (int i : weights.inner_mouth_indices) w[static_cast<std::size_t>(i)] = weights.inner_mouth;
  return w;
}

LossBreakdown total_loss(double photometric, double perceptual, double landmark, double coefficient,
                         double reflectance, const LossWeights& w) {
  LossBreakdown b;
  b.photometric = photometric;
  b.perceptual = perceptual;
  b.landmark = landmark;
  b.coefficient = coefficient;
  b.reflectance = reflectance;
  b.total = w.photometric * photometric + w.perceptual * perceptual + w.landmark * landmark +
            w.coefficient * coefficient + w.reflectance * reflectance;
  return b;
}

PhotometricResult photometric_loss(const Image& input, const Image& rendered, const Image& render_mask,
                                   const Image* skin_mask) {
  check_same_shape(input, rendered, "photometric loss image sizes");
  check_same_shape(input, render_mask, "photometric loss render mask size");
  if (skin_mask) check_same_shape(input, *skin_mask, "photometric loss skin mask size");
  double num = 0.0, den = 0.0;
  for (int y = 0; y < input.height(); ++y) {
    for (int x = 0; x < input.width(); ++x) {
      const double a = pixel_weight(render_mask, skin_mask, y, x);
      if (a == 0.0) continue;
      double sq = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = input.at(y, x, c) - rendered.at(y, x, c);
        sq += d * d;
      }
      num += a * std::sqrt(sq);
      den += a;
    }
  }
  if (den == 0.0) return {0.0, true};
  return {num / den, false};
}

Image photometric_loss_gradient(const Image& input, const Image& rendered, const Image& render_mask,
                                const Image* skin_mask) {
  check_same_shape(input, rendered, "photometric loss image sizes");
  Image grad(rendered.height(), rendered.width(), 3);
  double den = 0.0;
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x) den += pixel_weight(render_mask, skin_mask, y, x);
  if (den == 0.0) return grad;
  for (int y = 0; y < input.height(); ++y) {
    for (int x = 0; x < input.width(); ++x) {
      const double a = pixel_weight(render_mask, skin_mask, y, x);
      if (a == 0.0) continue;
      Eigen::Vector3d d;
      for (int c = 0; c < 3; ++c) d[c] = rendered.at(y, x, c) - input.at(y, x, c);
      const double norm = d.norm();
      if (norm == 0.0) continue;
      for (int c = 0; c < 3; ++c) grad.at(y, x, c) = a * d[c] / (norm * den);
    }
  }
  return grad;
}

double perceptual_loss(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  check_size("embedding length", b.size(), a.size());
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - a.dot(b) / (na * nb);
}

Eigen::VectorXd perceptual_loss_gradient(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  check_size("embedding length", b.size(), a.size());
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return Eigen::VectorXd::Zero(b.size());
  const double cos = a.dot(b) / (na * nb);
  return -(a / (na * nb) - cos * b / (nb * nb));
}

double landmark_loss(const Landmarks2& detected, const Landmarks2& projected, const LandmarkWeights& w) {
  double sum = 0.0;
  for (int n = 0; n < kNumLandmarks; ++n) {
    sum += w[static_cast<std::size_t>(n)] * (detected.row(n) - projected.row(n)).squaredNorm();
  }
  return sum / kNumLandmarks;
}

Landmarks2 landmark_loss_gradient(const Landmarks2& detected, const Landmarks2& projected,
                                  const LandmarkWeights& w) {
  Landmarks2 g;
  for (int n = 0; n < kNumLandmarks; ++n) {
    g.row(n) = 2.0 * w[static_cast<std::size_t>(n)] * (projected.row(n) - detected.row(n)) / kNumLandmarks;
  }
  return g;
}

double coefficient_regularization(const ShapeCoefficients& alpha, const ExpressionCoefficients& beta,
                                  const TextureCoefficients& gamma, const LossWeights& w) {
  return w.identity * alpha.values.squaredNorm() + w.expression * beta.values.squaredNorm() +
         w.texture * gamma.values.squaredNorm();
}

double reflectance_loss(const Vertices& texture, std::span<const std::uint8_t> mask) {
  check_mask(texture, mask);
  const Eigen::RowVector3d mean = masked_mean(texture, mask);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < texture.rows(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) sum += (texture.row(i) - mean).squaredNorm();
  }
  return sum / masked_sum(mask);
}

Vertices reflectance_loss_gradient(const Vertices& texture, std::span<const std::uint8_t> mask) {
  check_mask(texture, mask);
  const Eigen::RowVector3d mean = masked_mean(texture, mask);
  const double count = masked_sum(mask);
  Vertices g = Vertices::Zero(texture.rows(), 3);
  // The derivative through the mean cancels because deviations sum to zero.
  for (Eigen::Index i = 0; i < texture.rows(); ++i) {
    if (mask[static_cast<std::size_t>(i)]) g.row(i) = 2.0 * (texture.row(i) - mean) / count;
  }
  return g;
}

ReconstructionObjective::ReconstructionObjective(const MorphableModel& model, const CameraModel& camera,
                                                 const ImageEmbedding& embedding, LossWeights weights)
    : model_(&model), camera_(camera), embedding_(&embedding), weights_(std::move(weights)) {
  camera_.validate();
  weights_.validate();
  landmark_weights_ = landmark_weights(weights_);
}

ObjectiveResult ReconstructionObjective::evaluate(const CoefficientVector& coefficients,
                                                  const ObjectiveTarget& target, bool with_gradient) const {
  if (!target.image || !target.landmarks) throw_data_error("objective target needs an image and landmarks");
  const Image& input = *target.image;
  if (input.height() != camera_.height || input.width() != camera_.width || input.channels() != 3) {
    throw_data_error("input image is {}x{}x{}, camera expects {}x{}x3", input.height(), input.width(),
                     input.channels(), camera_.height, camera_.width);
  }
  ObjectiveResult r;
  r.state = render_face(*model_, coefficients, camera_);
  const RenderOutput& ro = r.state.render;

  const PhotometricResult pho = photometric_loss(input, ro.image, ro.mask, target.skin_mask);
  r.empty_coverage = pho.empty_coverage;

  Image composite = input;
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x)
      if (ro.mask.at(y, x) != 0.0)
        for (int c = 0; c < 3; ++c) composite.at(y, x, c) = ro.image.at(y, x, c);
  const Eigen::VectorXd emb_input = embedding_->embed(input);
  const Eigen::VectorXd emb_render = embedding_->embed(composite);
  const double per = perceptual_loss(emb_input, emb_render);

  const double lmk = landmark_loss(*target.landmarks, r.state.landmarks, landmark_weights_);
  const double reg = coefficient_regularization(coefficients.identity, coefficients.expression,
                                                coefficients.texture, weights_);
  const double refl = reflectance_loss(r.state.texture, model_->region_mask());
  r.breakdown = total_loss(pho.value, per, lmk, reg, refl, weights_);
  if (!with_gradient) return r;

  Image grad_image = photometric_loss_gradient(input, ro.image, ro.mask, target.skin_mask);
  for (auto& v : grad_image.data()) v *= weights_.photometric;
  const Image grad_composite =
      embedding_->backward(composite, weights_.perceptual * perceptual_loss_gradient(emb_input, emb_render));
  for (int y = 0; y < input.height(); ++y)
    for (int x = 0; x < input.width(); ++x)
      if (ro.mask.at(y, x) != 0.0)
        for (int c = 0; c < 3; ++c) grad_image.at(y, x, c) += grad_composite.at(y, x, c);

  const Landmarks2 grad_landmarks =
      weights_.landmark * landmark_loss_gradient(*target.landmarks, r.state.landmarks, landmark_weights_);
  const Vertices grad_texture =
      weights_.reflectance * reflectance_loss_gradient(r.state.texture, model_->region_mask());

  FaceRenderUpstream up;
  up.image = &grad_image;
  up.landmarks = &grad_landmarks;
  up.texture = &grad_texture;
  r.gradient = render_face_backward(*model_, camera_, r.state, up);
  r.gradient.segment<kIdentityDims>(kIdentityBegin) +=
      weights_.coefficient * 2.0 * weights_.identity * coefficients.identity.values;
  r.gradient.segment<kExpressionDims>(kExpressionBegin) +=
      weights_.coefficient * 2.0 * weights_.expression * coefficients.expression.values;
  r.gradient.segment<kTextureDims>(kTextureBegin) +=
      weights_.coefficient * 2.0 * weights_.texture * coefficients.texture.values;
  return r;
}

}  // namespace mlaface
