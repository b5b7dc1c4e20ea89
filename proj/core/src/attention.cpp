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

#include "mlaface/attention.hpp"

#include <algorithm>

#include "mlaface/error.hpp"

namespace mlaface {

using nn::Tensor;

namespace {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) throw_data_error("channel concat shape mismatch");
  Tensor y(a.n(), a.c() + b.c(), a.h(), a.w());
  for (int n = 0; n < a.n(); ++n) {
    std::copy_n(a.sample(n), a.c() * a.plane(), y.sample(n));
    std::copy_n(b.sample(n), b.c() * b.plane(), y.channel(n, a.c()));
  }
  return y;
}

Tensor slice_channels(const Tensor& x, int begin, int count) {
  Tensor y(x.n(), count, x.h(), x.w());
  for (int n = 0; n < x.n(); ++n) std::copy_n(x.channel(n, begin), count * x.plane(), y.sample(n));
  return y;
}

// Rows [begin, begin + count) of an N x C x L x 1 tensor.
Tensor slice_rows(const Tensor& x, int begin, int count) {
  Tensor y(x.n(), x.c(), count, 1);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) std::copy_n(x.channel(n, c) + begin, count, y.channel(n, c));
  return y;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  Tensor y(a.n(), a.c(), a.h() + b.h(), 1);
  for (int n = 0; n < a.n(); ++n) {
    for (int c = 0; c < a.c(); ++c) {
      std::copy_n(a.channel(n, c), a.h(), y.channel(n, c));
      std::copy_n(b.channel(n, c), b.h(), y.channel(n, c) + a.h());
    }
  }
  return y;
}

Tensor sigmoid_backward(const Tensor& s, const Tensor& g) {
  Tensor d = g;
  for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] *= s.data()[i] * (1.0 - s.data()[i]);
  return d;
}

}  // namespace

int attention_hidden(int channels, int reduction) {
  if (reduction <= 0) throw_config_error("attention reduction ratio must be positive, got {}", reduction);
  return std::max(1, channels / reduction);
}

// ------------------------------------------------------------------ HSCA

Hsca::Hsca(const std::string& name, int channels, int reduction)
    : shared(name + ".shared", channels, attention_hidden(channels, reduction), 1, 1, 0, true),
      conv_h(name + ".conv_h", attention_hidden(channels, reduction), channels, 1, 1, 0, true),
      conv_w(name + ".conv_w", attention_hidden(channels, reduction), channels, 1, 1, 0, true),
      squeeze(name + ".squeeze", channels, attention_hidden(channels, reduction), 1, 1, 0, true),
      excite(name + ".excite", attention_hidden(channels, reduction), channels, 1, 1, 0, true),
      channels_(channels) {}

void Hsca::init(std::mt19937_64& rng) {
  for (nn::Conv2d* c : {&shared, &conv_h, &conv_w, &squeeze, &excite}) c->init(rng);
}

Tensor Hsca::forward(const Tensor& x, Cache* cache) const {
  if (x.c() != channels_) throw_data_error("HSCA expects {} channels, got {}", channels_, x.c());
  const int H = x.h(), W = x.w();
  // Row pool (mean over W) followed by column pool (mean over H), stacked
  // along a single spatial axis.
  Tensor pooled(x.n(), x.c(), H + W, 1);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.channel(n, c);
      double* q = pooled.channel(n, c);
      for (int y = 0; y < H; ++y) {
        double s = 0.0;
        for (int xx = 0; xx < W; ++xx) s += p[y * W + xx];
        q[y] = s / W;
      }
      for (int xx = 0; xx < W; ++xx) {
        double s = 0.0;
        for (int y = 0; y < H; ++y) s += p[y * W + xx];
        q[H + xx] = s / H;
      }
    }
  }
  Tensor hidden = nn::relu(shared.forward(pooled, cache ? &cache->shared : nullptr));
  const Tensor hidden_h = slice_rows(hidden, 0, H);
  const Tensor hidden_w = slice_rows(hidden, H, W);
  Tensor gate_h = nn::sigmoid(conv_h.forward(hidden_h, cache ? &cache->conv_h : nullptr));
  Tensor gate_w = nn::sigmoid(conv_w.forward(hidden_w, cache ? &cache->conv_w : nullptr));

  Tensor spatial(x.n(), x.c(), H, W);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.channel(n, c);
      const double* gh = gate_h.channel(n, c);
      const double* gw = gate_w.channel(n, c);
      double* o = spatial.channel(n, c);
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) o[y * W + xx] = p[y * W + xx] * gh[y] * gw[xx];
    }
  }

  const Tensor pooled_c = nn::global_avg_pool(spatial);
  Tensor squeeze_out = nn::relu(squeeze.forward(pooled_c, cache ? &cache->squeeze : nullptr));
  Tensor gate_c = nn::sigmoid(excite.forward(squeeze_out, cache ? &cache->excite : nullptr));

  Tensor out(x.n(), x.c(), H, W);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double s = gate_c.at(n, c, 0, 0);
      const double* p = spatial.channel(n, c);
      double* o = out.channel(n, c);
      for (std::size_t i = 0; i < x.plane(); ++i) o[i] = p[i] * s;
    }
  }
  if (cache) {
    cache->input = x;
    cache->hidden = std::move(hidden);
    cache->gate_h = std::move(gate_h);
    cache->gate_w = std::move(gate_w);
    cache->spatial = std::move(spatial);
    cache->squeeze_out = std::move(squeeze_out);
    cache->gate_c = std::move(gate_c);
  }
  return out;
}

Tensor Hsca::backward(const Cache& k, const Tensor& g) {
  const Tensor& x = k.input;
  const int H = x.h(), W = x.w();

  // Channel gate.
  Tensor d_spatial(x.n(), x.c(), H, W);
  Tensor d_gate_c(x.n(), x.c(), 1, 1);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double s = k.gate_c.at(n, c, 0, 0);
      const double* gp = g.channel(n, c);
      const double* sp = k.spatial.channel(n, c);
      double* d = d_spatial.channel(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < x.plane(); ++i) {
        d[i] = gp[i] * s;
        acc += gp[i] * sp[i];
      }
      d_gate_c.at(n, c, 0, 0) = acc;
    }
  }
  Tensor d_sq = excite.backward(k.excite, sigmoid_backward(k.gate_c, d_gate_c));
  const Tensor d_pooled_c = squeeze.backward(k.squeeze, nn::relu_backward(k.squeeze_out, d_sq));
  nn::add_inplace(d_spatial, nn::global_avg_pool_backward(d_pooled_c, H, W));

  // Spatial gate.
  Tensor dx(x.n(), x.c(), H, W);
  Tensor d_gate_h(x.n(), x.c(), H, 1);
  Tensor d_gate_w(x.n(), x.c(), W, 1);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double* p = x.channel(n, c);
      const double* gh = k.gate_h.channel(n, c);
      const double* gw = k.gate_w.channel(n, c);
      const double* ds = d_spatial.channel(n, c);
      double* d = dx.channel(n, c);
      double* dgh = d_gate_h.channel(n, c);
      double* dgw = d_gate_w.channel(n, c);
      for (int y = 0; y < H; ++y) {
        for (int xx = 0; xx < W; ++xx) {
          const double v = ds[y * W + xx];
          d[y * W + xx] = v * gh[y] * gw[xx];
          dgh[y] += v * p[y * W + xx] * gw[xx];
          dgw[xx] += v * p[y * W + xx] * gh[y];
        }
      }
    }
  }
  const Tensor d_hidden_h = conv_h.backward(k.conv_h, sigmoid_backward(k.gate_h, d_gate_h));
  const Tensor d_hidden_w = conv_w.backward(k.conv_w, sigmoid_backward(k.gate_w, d_gate_w));
  const Tensor d_hidden = nn::relu_backward(k.hidden, concat_rows(d_hidden_h, d_hidden_w));
  const Tensor d_pooled = shared.backward(k.shared, d_hidden);
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const double* q = d_pooled.channel(n, c);
      double* d = dx.channel(n, c);
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) d[y * W + xx] += q[y] / W + q[H + xx] / H;
    }
  }
  return dx;
}

void Hsca::collect(nn::ParameterList& params) {
  for (nn::Conv2d* c : {&shared, &conv_h, &conv_w, &squeeze, &excite}) c->collect(params);
}

// ------------------------------------------------------------------ PAFB

namespace {

Pafb::Branch make_branch(const std::string& name, int channels, int reduction) {
  const int in = 4 * channels, out = 2 * channels, mid = attention_hidden(out, reduction);
  return {nn::Conv2d(name + ".conv1", in, mid, 1, 1, 0, false), nn::BatchNorm2d(name + ".bn1", mid),
          nn::Conv2d(name + ".conv2", mid, out, 1, 1, 0, false), nn::BatchNorm2d(name + ".bn2", out)};
}

Tensor branch_forward(const Pafb::Branch& b, const Tensor& x, Pafb::BranchCache* k) {
  Tensor h = b.conv1.forward(x, k ? &k->conv1 : nullptr);
  h = nn::relu(b.bn1.forward(h, k ? &k->bn1 : nullptr));
  Tensor y = b.bn2.forward(b.conv2.forward(h, k ? &k->conv2 : nullptr), k ? &k->bn2 : nullptr);
  if (k) k->hidden = std::move(h);
  return y;
}

Tensor branch_backward(Pafb::Branch& b, const Pafb::BranchCache& k, const Tensor& g) {
  Tensor d = b.conv2.backward(k.conv2, b.bn2.backward(k.bn2, g));
  d = b.bn1.backward(k.bn1, nn::relu_backward(k.hidden, d));
  return b.conv1.backward(k.conv1, d);
}

void branch_collect(Pafb::Branch& b, nn::ParameterList& params) {
  b.conv1.collect(params);
  b.bn1.collect(params);
  b.conv2.collect(params);
  b.bn2.collect(params);
}

}  // namespace

Pafb::Pafb(const std::string& name, int high_channels, int reduction)
    : down(name + ".down", high_channels, 2 * high_channels, 1, 2, 0, true),
      local(make_branch(name + ".local", high_channels, reduction)),
      global(make_branch(name + ".global", high_channels, reduction)),
      channels_(high_channels) {}

void Pafb::init(std::mt19937_64& rng) {
  down.init(rng);
  for (Branch* b : {&local, &global}) {
    b->conv1.init(rng);
    b->conv2.init(rng);
  }
}

Tensor Pafb::forward(const Tensor& high, const Tensor& low, Cache* cache) const {
  if (high.c() != channels_) throw_data_error("PAFB expects {} high-resolution channels, got {}", channels_, high.c());
  Tensor d = down.forward(high, cache ? &cache->down : nullptr);
  if (!d.same_shape(low)) {
    throw_data_error("PAFB: downsampled map {}x{}x{} does not match low-resolution map {}x{}x{}", d.c(), d.h(),
                     d.w(), low.c(), low.h(), low.w());
  }
  const Tensor combined = concat_channels(low, d);
  const Tensor local_out = branch_forward(local, combined, cache ? &cache->local : nullptr);
  const Tensor global_out =
      branch_forward(global, nn::global_avg_pool(combined), cache ? &cache->global : nullptr);

  Tensor omega1(low.n(), low.c(), low.h(), low.w());
  Tensor omega2(low.n(), low.c(), low.h(), low.w());
  Tensor out(low.n(), low.c(), low.h(), low.w());
  for (int n = 0; n < low.n(); ++n) {
    for (int c = 0; c < low.c(); ++c) {
      const double gl = global_out.at(n, c, 0, 0);
      const double* lo = local_out.channel(n, c);
      const double* dp = d.channel(n, c);
      const double* lp = low.channel(n, c);
      double* w1 = omega1.channel(n, c);
      double* w2 = omega2.channel(n, c);
      double* o = out.channel(n, c);
      for (std::size_t i = 0; i < low.plane(); ++i) {
        w1[i] = nn::sigmoid(lo[i] + gl);
        w2[i] = 1.0 - w1[i];
        o[i] = w1[i] * dp[i] + w2[i] * lp[i];
      }
    }
  }
  if (cache) {
    cache->downsampled = std::move(d);
    cache->low = low;
    cache->combined_h = combined.h();
    cache->combined_w = combined.w();
    cache->omega1 = std::move(omega1);
    cache->omega2 = std::move(omega2);
  }
  return out;
}

Pafb::Gradients Pafb::backward(const Cache& k, const Tensor& g) {
  const Tensor& d = k.downsampled;
  const Tensor& low = k.low;
  Tensor dd(d.n(), d.c(), d.h(), d.w());
  Tensor dl(d.n(), d.c(), d.h(), d.w());
  Tensor d_refined(d.n(), d.c(), d.h(), d.w());
  Tensor d_global(d.n(), d.c(), 1, 1);
  for (int n = 0; n < d.n(); ++n) {
    for (int c = 0; c < d.c(); ++c) {
      const double* gp = g.channel(n, c);
      const double* w1 = k.omega1.channel(n, c);
      const double* w2 = k.omega2.channel(n, c);
      const double* dp = d.channel(n, c);
      const double* lp = low.channel(n, c);
      double* ddp = dd.channel(n, c);
      double* dlp = dl.channel(n, c);
      double* dr = d_refined.channel(n, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < d.plane(); ++i) {
        ddp[i] = gp[i] * w1[i];
        dlp[i] = gp[i] * w2[i];
        dr[i] = gp[i] * (dp[i] - lp[i]) * w1[i] * w2[i];
        acc += dr[i];
      }
      d_global.at(n, c, 0, 0) = acc;
    }
  }
  Tensor d_combined = branch_backward(local, k.local, d_refined);
  nn::add_inplace(d_combined, nn::global_avg_pool_backward(branch_backward(global, k.global, d_global),
                                                           k.combined_h, k.combined_w));
  nn::add_inplace(dl, slice_channels(d_combined, 0, d.c()));
  nn::add_inplace(dd, slice_channels(d_combined, d.c(), d.c()));
  return {down.backward(k.down, dd), std::move(dl)};
}

void Pafb::update_running_statistics(const Cache& k) {
  local.bn1.update_running_statistics(k.local.bn1);
  local.bn2.update_running_statistics(k.local.bn2);
  global.bn1.update_running_statistics(k.global.bn1);
  global.bn2.update_running_statistics(k.global.bn2);
}

void Pafb::collect(nn::ParameterList& params) {
  down.collect(params);
  branch_collect(local, params);
  branch_collect(global, params);
}

void Pafb::collect_buffers(nn::ParameterList& buffers) {
  for (Branch* b : {&local, &global}) {
    b->bn1.collect_buffers(buffers);
    b->bn2.collect_buffers(buffers);
  }
}

}  // namespace mlaface
