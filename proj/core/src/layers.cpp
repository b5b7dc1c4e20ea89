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

#include "mlaface/nn/layers.hpp"

#include <cmath>
#include <limits>

#include "mlaface/error.hpp"

namespace mlaface::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

int product(const std::vector<int>& shape) {
  int p = 1;
  for (int s : shape) p *= s;
  return p;
}

// Rows: (c, ky, kx); columns: output positions (oy, ox).
RowMatrix im2col(const double* x, int c, int h, int w, int k, int stride, int pad, int oh, int ow) {
  RowMatrix cols(static_cast<Eigen::Index>(c) * k * k, static_cast<Eigen::Index>(oh) * ow);
  for (int ci = 0; ci < c; ++ci) {
    const double* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.row((ci * k + ky) * k + kx).data();
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[oy * ow + ox] = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane[iy * w + ix] : 0.0;
          }
        }
      }
    }
  }
  return cols;
}

void col2im(const RowMatrix& cols, double* x, int c, int h, int w, int k, int stride, int pad, int oh, int ow) {
  for (int ci = 0; ci < c; ++ci) {
    double* plane = x + static_cast<std::size_t>(ci) * h * w;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols.row((ci * k + ky) * k + kx).data();
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) plane[iy * w + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(int k, int stride, int pad) { return k == 1 && stride == 1 && pad == 0; }

}  // namespace

Parameter::Parameter(std::string n, std::vector<int> s, double fill)
    : name(std::move(n)), shape(std::move(s)) {
  value = Eigen::VectorXd::Constant(product(shape), fill);
  grad = Eigen::VectorXd::Zero(value.size());
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, int kernel, int stride, int padding,
               bool bias)
    : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
      bias(name + ".bias", {bias ? out_channels : 0}),
      in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding), has_bias_(bias) {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || padding < 0) {
    throw_config_error("invalid convolution {}: {}->{} k{} s{} p{}", name, in_channels, out_channels, kernel,
                       stride, padding);
  }
}

void Conv2d::init(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (in_ * k_ * k_)));
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value[i] = normal(rng);
  bias.value.setZero();
}

Tensor Conv2d::forward(const Tensor& x, Cache* cache) const {
  if (x.c() != in_) throw_data_error("{}: expected {} input channels, got {}", weight.name, in_, x.c());
  const int oh = output_size(x.h()), ow = output_size(x.w());
  if (oh <= 0 || ow <= 0) throw_data_error("{}: input {}x{} too small", weight.name, x.h(), x.w());
  Tensor y(x.n(), out_, oh, ow);
  const ConstRowMap wmat(weight.value.data(), out_, static_cast<Eigen::Index>(in_) * k_ * k_);
  for (int n = 0; n < x.n(); ++n) {
    RowMap out(y.sample(n), out_, static_cast<Eigen::Index>(oh) * ow);
    if (is_pointwise(k_, stride_, pad_)) {
      out.noalias() = wmat * ConstRowMap(x.sample(n), in_, static_cast<Eigen::Index>(x.plane()));
    } else {
      out.noalias() = wmat * im2col(x.sample(n), in_, x.h(), x.w(), k_, stride_, pad_, oh, ow);
    }
    if (has_bias_) out.colwise() += bias.value;
  }
  if (cache) cache->input = x;
  return y;
}

Tensor Conv2d::backward(const Cache& cache, const Tensor& g) {
  const Tensor& x = cache.input;
  const int oh = g.h(), ow = g.w();
  const Eigen::Index kk = static_cast<Eigen::Index>(in_) * k_ * k_;
  const Eigen::Index positions = static_cast<Eigen::Index>(oh) * ow;
  Tensor dx(x.n(), x.c(), x.h(), x.w());
  const ConstRowMap wmat(weight.value.data(), out_, kk);
  RowMap gw(weight.grad.data(), out_, kk);
  for (int n = 0; n < x.n(); ++n) {
    const ConstRowMap gout(g.sample(n), out_, positions);
    if (has_bias_) bias.grad += gout.rowwise().sum();
    if (is_pointwise(k_, stride_, pad_)) {
      const ConstRowMap xin(x.sample(n), in_, positions);
      gw.noalias() += gout * xin.transpose();
      RowMap(dx.sample(n), in_, positions).noalias() = wmat.transpose() * gout;
    } else {
      const RowMatrix cols = im2col(x.sample(n), in_, x.h(), x.w(), k_, stride_, pad_, oh, ow);
      gw.noalias() += gout * cols.transpose();
      const RowMatrix dcols = wmat.transpose() * gout;
      col2im(dcols, dx.sample(n), in_, x.h(), x.w(), k_, stride_, pad_, oh, ow);
    }
  }
  return dx;
}

void Conv2d::collect(ParameterList& params) {
  params.push_back(&weight);
  if (has_bias_) params.push_back(&bias);
}

// ----------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(const std::string& name, int channels, double momentum, double eps)
    : gamma(name + ".weight", {channels}, 1.0),
      beta(name + ".bias", {channels}, 0.0),
      running_mean(name + ".running_mean", {channels}, 0.0),
      running_var(name + ".running_var", {channels}, 1.0),
      channels_(channels), momentum_(momentum), eps_(eps) {
  if (channels <= 0) throw_config_error("invalid batch norm {} with {} channels", name, channels);
}

Tensor BatchNorm2d::forward(const Tensor& x, Cache* cache) const {
  if (x.c() != channels_) throw_data_error("{}: expected {} channels, got {}", gamma.name, channels_, x.c());
  const int count = x.n() * static_cast<int>(x.plane());
  const bool batch = cache && count > 1;
  Eigen::VectorXd mean(channels_), var(channels_);
  if (batch) {
    for (int c = 0; c < channels_; ++c) {
      double s = 0.0;
      for (int n = 0; n < x.n(); ++n) {
        const double* p = x.channel(n, c);
        for (std::size_t i = 0; i < x.plane(); ++i) s += p[i];
      }
      const double m = s / count;
      double v = 0.0;
      for (int n = 0; n < x.n(); ++n) {
        const double* p = x.channel(n, c);
        for (std::size_t i = 0; i < x.plane(); ++i) v += (p[i] - m) * (p[i] - m);
      }
      mean[c] = m;
      var[c] = v / count;
    }
  } else {
    mean = running_mean.value;
    var = running_var.value;
  }
  const Eigen::VectorXd inv_std = (var.array() + eps_).rsqrt();
  Tensor xhat(x.n(), x.c(), x.h(), x.w());
  Tensor y(x.n(), x.c(), x.h(), x.w());
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < channels_; ++c) {
      const double* p = x.channel(n, c);
      double* h = xhat.channel(n, c);
      double* o = y.channel(n, c);
      for (std::size_t i = 0; i < x.plane(); ++i) {
        h[i] = (p[i] - mean[c]) * inv_std[c];
        o[i] = gamma.value[c] * h[i] + beta.value[c];
      }
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->mean = mean;
    cache->var = var;
    cache->inv_std = inv_std;
    cache->batch_statistics = batch;
    cache->count = count;
  }
  return y;
}

Tensor BatchNorm2d::backward(const Cache& cache, const Tensor& g) {
  const Tensor& xhat = cache.xhat;
  Tensor dx(g.n(), g.c(), g.h(), g.w());
  for (int c = 0; c < channels_; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (int n = 0; n < g.n(); ++n) {
      const double* gp = g.channel(n, c);
      const double* hp = xhat.channel(n, c);
      for (std::size_t i = 0; i < g.plane(); ++i) {
        sum_g += gp[i];
        sum_gx += gp[i] * hp[i];
      }
    }
    gamma.grad[c] += sum_gx;
    beta.grad[c] += sum_g;
    const double scale = gamma.value[c] * cache.inv_std[c];
    for (int n = 0; n < g.n(); ++n) {
      const double* gp = g.channel(n, c);
      const double* hp = xhat.channel(n, c);
      double* d = dx.channel(n, c);
      if (cache.batch_statistics) {
        const double m = cache.count;
        for (std::size_t i = 0; i < g.plane(); ++i) d[i] = scale * (gp[i] - sum_g / m - hp[i] * sum_gx / m);
      } else {
        for (std::size_t i = 0; i < g.plane(); ++i) d[i] = scale * gp[i];
      }
    }
  }
  return dx;
}

void BatchNorm2d::update_running_statistics(const Cache& cache) {
  if (!cache.batch_statistics) return;
  const double unbias = static_cast<double>(cache.count) / (cache.count - 1);
  running_mean.value = (1.0 - momentum_) * running_mean.value + momentum_ * cache.mean;
  running_var.value = (1.0 - momentum_) * running_var.value + momentum_ * unbias * cache.var;
}

void BatchNorm2d::collect(ParameterList& params) {
  params.push_back(&gamma);
  params.push_back(&beta);
}

void BatchNorm2d::collect_buffers(ParameterList& buffers) {
  buffers.push_back(&running_mean);
  buffers.push_back(&running_var);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, int in_features, int out_features)
    : weight(name + ".weight", {out_features, in_features}),
      bias(name + ".bias", {out_features}),
      in_(in_features), out_(out_features) {
  if (in_features <= 0 || out_features <= 0) throw_config_error("invalid linear layer {}", name);
}

void Linear::init(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  for (Eigen::Index i = 0; i < weight.value.size(); ++i) weight.value[i] = normal(rng);
  bias.value.setZero();
}

Tensor Linear::forward(const Tensor& x, Cache* cache) const {
  if (x.c() * static_cast<int>(x.plane()) != in_) {
    throw_data_error("{}: expected {} features, got {}", weight.name, in_, x.c() * x.plane());
  }
  Tensor y(x.n(), out_, 1, 1);
  const ConstRowMap w(weight.value.data(), out_, in_);
  for (int n = 0; n < x.n(); ++n) {
    Eigen::Map<Eigen::VectorXd>(y.sample(n), out_) =
        w * Eigen::Map<const Eigen::VectorXd>(x.sample(n), in_) + bias.value;
  }
  if (cache) cache->input = x;
  return y;
}

Tensor Linear::backward(const Cache& cache, const Tensor& g) {
  const Tensor& x = cache.input;
  Tensor dx(x.n(), x.c(), x.h(), x.w());
  const ConstRowMap w(weight.value.data(), out_, in_);
  RowMap gw(weight.grad.data(), out_, in_);
  for (int n = 0; n < x.n(); ++n) {
    const Eigen::Map<const Eigen::VectorXd> gout(g.sample(n), out_);
    const Eigen::Map<const Eigen::VectorXd> xin(x.sample(n), in_);
    gw.noalias() += gout * xin.transpose();
    bias.grad += gout;
    Eigen::Map<Eigen::VectorXd>(dx.sample(n), in_).noalias() = w.transpose() * gout;
  }
  return dx;
}

void Linear::collect(ParameterList& params) {
  params.push_back(&weight);
  params.push_back(&bias);
}

// ------------------------------------------------------- pointwise ops

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& out, const Tensor& g) {
  Tensor d = g;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(out.data()[i] > 0.0)) d.data()[i] = 0.0;
  }
  return d;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = sigmoid(v);
  return y;
}

Tensor max_pool(const Tensor& x, MaxPoolCache* cache) {
  constexpr int k = 3, s = 2, p = 1;
  const int oh = (x.h() + 2 * p - k) / s + 1, ow = (x.w() + 2 * p - k) / s + 1;
  Tensor y(x.n(), x.c(), oh, ow);
  if (cache) {
    cache->in_h = x.h();
    cache->in_w = x.w();
    cache->argmax.assign(y.size(), 0);
  }
  std::size_t out_index = 0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double* plane = x.channel(n, c);
      double* out = y.channel(n, c);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox, ++out_index) {
          double best = -std::numeric_limits<double>::infinity();
          int best_at = -1;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * s - p + ky;
            if (iy < 0 || iy >= x.h()) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * s - p + kx;
              if (ix < 0 || ix >= x.w()) continue;
              if (best_at < 0 || plane[iy * x.w() + ix] > best) {
                best = plane[iy * x.w() + ix];
                best_at = iy * x.w() + ix;
              }
            }
          }
          out[oy * ow + ox] = best;
          if (cache) cache->argmax[out_index] = best_at;
        }
      }
    }
  }
  return y;
}

Tensor max_pool_backward(const MaxPoolCache& cache, const Tensor& g) {
  Tensor dx(g.n(), g.c(), cache.in_h, cache.in_w);
  std::size_t out_index = 0;
  for (int n = 0; n < g.n(); ++n) {
    for (int c = 0; c < g.c(); ++c) {
      const double* gp = g.channel(n, c);
      double* d = dx.channel(n, c);
      for (std::size_t i = 0; i < g.plane(); ++i, ++out_index) d[cache.argmax[out_index]] += gp[i];
    }
  }
  return dx;
}

Tensor global_avg_pool(const Tensor& x) {
  Tensor y(x.n(), x.c(), 1, 1);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.channel(n, c);
      double s = 0.0;
      for (std::size_t i = 0; i < x.plane(); ++i) s += p[i];
      y.at(n, c, 0, 0) = s / static_cast<double>(x.plane());
    }
  }
  return y;
}

Tensor global_avg_pool_backward(const Tensor& g, int h, int w) {
  Tensor dx(g.n(), g.c(), h, w);
  const double inv = 1.0 / (static_cast<double>(h) * w);
  for (int n = 0; n < g.n(); ++n) {
    for (int c = 0; c < g.c(); ++c) {
      const double v = g.at(n, c, 0, 0) * inv;
      double* d = dx.channel(n, c);
      for (std::size_t i = 0; i < dx.plane(); ++i) d[i] = v;
    }
  }
  return dx;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw_data_error("tensor shape mismatch in add");
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

// ------------------------------------------------------------------ Adam

Adam::Adam(ParameterList params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Parameter* p : params_) {
    m_.push_back(Eigen::VectorXd::Zero(p->value.size()));
    v_.push_back(Eigen::VectorXd::Zero(p->value.size()));
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

}  // namespace mlaface::nn
