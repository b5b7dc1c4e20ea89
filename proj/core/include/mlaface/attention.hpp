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

#include <string>

#include "mlaface/nn/layers.hpp"

namespace mlaface {

// Width of the hidden layer of an attention branch.
int attention_hidden(int channels, int reduction);

// Hybrid spatial-channel attention. A coordinate-style spatial gate built
// from row and column average pools is applied first, then a
// squeeze-and-excitation channel gate on the spatially gated map.
class Hsca {
 public:
  struct Cache {
    nn::Tensor input;
    nn::Conv2d::Cache shared;
    nn::Tensor hidden;  // N x mid x (H + W) x 1, after ReLU
    nn::Conv2d::Cache conv_h, conv_w;
    nn::Tensor gate_h;  // N x C x H x 1
    nn::Tensor gate_w;  // N x C x W x 1
    nn::Tensor spatial;  // input gated by gate_h * gate_w
    nn::Conv2d::Cache squeeze;
    nn::Tensor squeeze_out;  // after ReLU
    nn::Conv2d::Cache excite;
    nn::Tensor gate_c;  // N x C x 1 x 1
  };

  Hsca() = default;
  Hsca(const std::string& name, int channels, int reduction);

  void init(std::mt19937_64& rng);
  int channels() const { return channels_; }

  nn::Tensor forward(const nn::Tensor& x, Cache* cache) const;
  nn::Tensor backward(const Cache& cache, const nn::Tensor& grad_out);
  void collect(nn::ParameterList& params);

  nn::Conv2d shared;  // C -> mid on the concatenated pools
  nn::Conv2d conv_h;  // mid -> C
  nn::Conv2d conv_w;  // mid -> C
  nn::Conv2d squeeze;  // C -> mid
  nn::Conv2d excite;   // mid -> C

 private:
  int channels_ = 0;
};

// Progressive attention fusion of a high-resolution map (C x H x W) with the
// next lower-resolution map (2C x H/2 x W/2).
class Pafb {
 public:
  struct BranchCache {
    nn::Conv2d::Cache conv1;
    nn::BatchNorm2d::Cache bn1;
    nn::Tensor hidden;  // after ReLU
    nn::Conv2d::Cache conv2;
    nn::BatchNorm2d::Cache bn2;
  };
  struct Cache {
    nn::Conv2d::Cache down;
    nn::Tensor downsampled;  // D(F_high)
    nn::Tensor low;
    int combined_h = 0, combined_w = 0;
    BranchCache local, global;
    nn::Tensor omega1;
    nn::Tensor omega2;
  };
  struct Gradients {
    nn::Tensor high;
    nn::Tensor low;
  };

  Pafb() = default;
  Pafb(const std::string& name, int high_channels, int reduction);

  void init(std::mt19937_64& rng);
  int high_channels() const { return channels_; }

  nn::Tensor forward(const nn::Tensor& high, const nn::Tensor& low, Cache* cache) const;
  Gradients backward(const Cache& cache, const nn::Tensor& grad_out);
  void update_running_statistics(const Cache& cache);
  void collect(nn::ParameterList& params);
  void collect_buffers(nn::ParameterList& buffers);

  struct Branch {
    nn::Conv2d conv1;  // 4C -> mid
    nn::BatchNorm2d bn1;
    nn::Conv2d conv2;  // mid -> 2C
    nn::BatchNorm2d bn2;
  };

  nn::Conv2d down;  // 1x1 stride 2, C -> 2C
  Branch local;
  Branch global;

 private:
  int channels_ = 0;
};

}  // namespace mlaface
