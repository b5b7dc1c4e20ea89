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

#include "mlaface/embedding.hpp"

#include <cmath>
#include <random>

#include "mlaface/error.hpp"

namespace mlaface {

namespace {

// Grid cell of a pixel coordinate along one axis.
int cell_of(int pixel, int extent, int grid) { return static_cast<int>(static_cast<long long>(pixel) * grid / extent); }

}  // namespace

RandomProjectionEmbedding::RandomProjectionEmbedding(std::uint64_t seed, int grid, int dims) : grid_(grid) {
  if (grid <= 0 || dims <= 0) throw_config_error("embedding grid and dims must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int in = grid * grid * 3;
  projection_.resize(dims, in);
  for (Eigen::Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = normal(rng) / std::sqrt(in);
}

Eigen::VectorXd RandomProjectionEmbedding::pool(const Image& image) const {
  if (image.channels() != 3) throw_data_error("embedding expects an RGB image");
  if (image.height() < grid_ || image.width() < grid_) {
    throw_data_error("image {}x{} smaller than embedding grid {}", image.height(), image.width(), grid_);
  }
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(grid_ * grid_ * 3);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(grid_ * grid_);
  for (int y = 0; y < image.height(); ++y) {
    const int gy = cell_of(y, image.height(), grid_);
    for (int x = 0; x < image.width(); ++x) {
      const int cell = gy * grid_ + cell_of(x, image.width(), grid_);
      counts[cell] += 1.0;
      for (int c = 0; c < 3; ++c) pooled[3 * cell + c] += image.at(y, x, c);
    }
  }
  for (int cell = 0; cell < grid_ * grid_; ++cell) pooled.segment<3>(3 * cell) /= counts[cell];
  return pooled;
}

Eigen::VectorXd RandomProjectionEmbedding::embed(const Image& image) const { return projection_ * pool(image); }

Image RandomProjectionEmbedding::backward(const Image& image, const Eigen::VectorXd& grad_embedding) const {
  check_size("embedding gradient", grad_embedding.size(), projection_.rows());
  const Eigen::VectorXd grad_pooled = projection_.transpose() * grad_embedding;
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(grid_ * grid_);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      counts[cell_of(y, image.height(), grid_) * grid_ + cell_of(x, image.width(), grid_)] += 1.0;
    }
  }
  Image grad(image.height(), image.width(), 3);
  for (int y = 0; y < image.height(); ++y) {
    const int gy = cell_of(y, image.height(), grid_);
    for (int x = 0; x < image.width(); ++x) {
      const int cell = gy * grid_ + cell_of(x, image.width(), grid_);
      for (int c = 0; c < 3; ++c) grad.at(y, x, c) = grad_pooled[3 * cell + c] / counts[cell];
    }
  }
  return grad;
}

}  // namespace mlaface
