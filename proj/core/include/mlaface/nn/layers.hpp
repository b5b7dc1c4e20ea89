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

#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mlaface/nn/tensor.hpp"

namespace mlaface::nn {

// Trainable array (or non-trainable buffer) with a flat value, its
// accumulated gradient and the logical shape used for checkpoints.
struct Parameter {
  std::string name;
  std::vector<int> shape;
  Eigen::VectorXd value;
  Eigen::VectorXd grad;

  Parameter() = default;
  Parameter(std::string name, std::vector<int> shape, double fill = 0.0);
  void zero_grad() { grad.setZero(); }
};

using ParameterList = std::vector<Parameter*>;

// Convolution with square kernel, symmetric zero padding and optional bias.
// Implemented as im2col followed by a matrix product.
class Conv2d {
 public:
  struct Cache {
    Tensor input;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, int padding,
         bool bias);

  // He-normal weights, zero bias.
  void init(std::mt19937_64& rng);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }
  int kernel() const { return k_; }
  int stride() const { return stride_; }
  int padding() const { return pad_; }
  bool has_bias() const { return has_bias_; }
  int output_size(int input) const { return (input + 2 * pad_ - k_) / stride_ + 1; }

  // weight(o, i, ky, kx) = weight.value[((o * in + i) * k + ky) * k + kx]
  Parameter weight;
  Parameter bias;

  // A null cache runs inference and records nothing.
  Tensor forward(const Tensor& x, Cache* cache) const;
  // Accumulates weight/bias gradients and returns d(loss)/d(input).
  Tensor backward(const Cache& cache, const Tensor& grad_out);

  void collect(ParameterList& params);

 private:
  int in_ = 0, out_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
  bool has_bias_ = false;
};

// Batch normalization over N, H, W per channel. With a cache (training) the
// batch statistics are used when more than one value per channel is
// available; otherwise the running statistics are used.
class BatchNorm2d {
 public:
  struct Cache {
    Tensor xhat;
    Eigen::VectorXd mean;
    Eigen::VectorXd var;      // biased batch variance
    Eigen::VectorXd inv_std;
    bool batch_statistics = false;
    int count = 0;
  };

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int channels, double momentum = 0.1, double eps = 1e-5);

  int channels() const { return channels_; }
  double eps() const { return eps_; }

  Parameter gamma;
  Parameter beta;
  Parameter running_mean;
  Parameter running_var;

  Tensor forward(const Tensor& x, Cache* cache) const;
  Tensor backward(const Cache& cache, const Tensor& grad_out);
  // Folds the batch statistics of a training forward pass into the running
  // statistics (unbiased variance). No-op when running statistics were used.
  void update_running_statistics(const Cache& cache);

  void collect(ParameterList& params);
  void collect_buffers(ParameterList& buffers);

 private:
  int channels_ = 0;
  double momentum_ = 0.1;
  double eps_ = 1e-5;
};

class Linear {
 public:
  struct Cache {
    Tensor input;
  };

  Linear() = default;
  Linear(const std::string& name, int in_features, int out_features);

  // Normal(0, stddev) weights, zero bias.
  void init(std::mt19937_64& rng, double stddev);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Parameter weight;  // out x in, row-major
  Parameter bias;

  // Input N x in x 1 x 1, output N x out x 1 x 1.
  Tensor forward(const Tensor& x, Cache* cache) const;
  Tensor backward(const Cache& cache, const Tensor& grad_out);

  void collect(ParameterList& params);

 private:
  int in_ = 0, out_ = 0;
};

Tensor relu(const Tensor& x);
// grad * [out > 0]
Tensor relu_backward(const Tensor& out, const Tensor& grad_out);

double sigmoid(double x);
Tensor sigmoid(const Tensor& x);

// 3x3 max pooling, stride 2, padding 1. Ties go to the first maximum in
// row-major window order.
struct MaxPoolCache {
  int in_h = 0, in_w = 0;
  std::vector<int> argmax;  // flat input offset within the channel plane
};
Tensor max_pool(const Tensor& x, MaxPoolCache* cache);
Tensor max_pool_backward(const MaxPoolCache& cache, const Tensor& grad_out);

// Mean over H and W; output N x C x 1 x 1.
Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const Tensor& grad_out, int h, int w);

void add_inplace(Tensor& a, const Tensor& b);

class Adam {
 public:
  Adam(ParameterList params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step(double lr);
  long long steps() const { return t_; }

 private:
  ParameterList params_;
  std::vector<Eigen::VectorXd> m_, v_;
  double beta1_, beta2_, eps_;
  long long t_ = 0;
};

}  // namespace mlaface::nn
