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

#include <cstdint>

#include <Eigen/Core>

#include "mlaface/image.hpp"

namespace mlaface {

// Feature embedding used by the perceptual loss. Implementations must be
// differentiable: backward() returns d(loss)/d(image) given d(loss)/d(embedding).
class ImageEmbedding {
 public:
  virtual ~ImageEmbedding() = default;
  virtual Eigen::VectorXd embed(const Image& image) const = 0;
  virtual Image backward(const Image& image, const Eigen::VectorXd& grad_embedding) const = 0;
};

// Average-pools the image onto a grid x grid x 3 lattice and applies a fixed
// Gaussian random projection. A desk-scale stand-in for a face-recognition
// network; linear, so backward() does not depend on the image values.
class RandomProjectionEmbedding final : public ImageEmbedding {
 public:
  RandomProjectionEmbedding(std::uint64_t seed, int grid = 16, int dims = 128);

  Eigen::VectorXd embed(const Image& image) const override;
  Image backward(const Image& image, const Eigen::VectorXd& grad_embedding) const override;

  int grid() const { return grid_; }
  int dims() const { return static_cast<int>(projection_.rows()); }

 private:
  Eigen::VectorXd pool(const Image& image) const;

  int grid_;
  Eigen::MatrixXd projection_;  // dims x (grid * grid * 3)
};

}  // namespace mlaface
