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

#include <random>

#include <gtest/gtest.h>

#include "mlaface/attention.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace mlaface {
namespace {

using nn::Tensor;
using testing::random_tensor;

Eigen::VectorXd as_vector(const Tensor& t) { return Eigen::Map<const Eigen::VectorXd>(t.data().data(), t.size()); }

double dot(const Tensor& a, const Tensor& b) { return as_vector(a).dot(as_vector(b)); }

// Non-trivial biases and BN affine terms so every path is exercised.
void randomize(nn::ParameterList params, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto* p : params) {
    if (p->name.find(".bias") != std::string::npos) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value[i] = normal(rng);
    } else if (p->name.find("bn") != std::string::npos && p->name.find(".weight") != std::string::npos) {
      for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value[i] = 1.0 + normal(rng);
    }
  }
}

TEST(Attention, HiddenWidth) {
  EXPECT_EQ(attention_hidden(64, 4), 16);
  EXPECT_EQ(attention_hidden(2, 4), 1);
  EXPECT_EQ(attention_hidden(10, 4), 2);
}

TEST(Hsca, MatchesNaiveLoops) {
  std::mt19937_64 rng(1);
  for (auto [c, h, w] : {std::tuple{8, 5, 7}, std::tuple{4, 1, 1}, std::tuple{16, 6, 6}}) {
    Hsca block("hsca", c, 4);
    block.init(rng);
    nn::ParameterList params;
    block.collect(params);
    randomize(params, rng);
    const Tensor x = random_tensor(2, c, h, w, rng);
    EXPECT_LT(oracle::relative_error(as_vector(block.forward(x, nullptr)), as_vector(oracle::hsca(x, block))), 1e-6);
    Hsca::Cache cache;
    EXPECT_LT(oracle::relative_error(as_vector(block.forward(x, &cache)), as_vector(oracle::hsca(x, block))), 1e-6);
  }
}

TEST(Hsca, SaturatedGatesReturnInput) {
  std::mt19937_64 rng(2);
  Hsca block("hsca", 8, 4);
  block.init(rng);
  for (nn::Conv2d* conv : {&block.conv_h, &block.conv_w, &block.excite}) {
    conv->weight.value.setZero();
    conv->bias.value.setConstant(1000.0);
  }
  const Tensor x = random_tensor(2, 8, 4, 5, rng);
  const Tensor y = block.forward(x, nullptr);
  EXPECT_EQ(y.data(), x.data());
}

TEST(Hsca, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  Hsca block("hsca", 4, 2);
  block.init(rng);
  nn::ParameterList params;
  block.collect(params);
  randomize(params, rng);
  const Tensor x = random_tensor(2, 4, 3, 4, rng);
  Hsca::Cache cache;
  const Tensor y = block.forward(x, &cache);
  const Tensor g = random_tensor(y.n(), y.c(), y.h(), y.w(), rng);
  for (auto* p : params) p->zero_grad();
  const Tensor dx = block.backward(cache, g);
  auto f = [&](const Tensor& in) { return dot(block.forward(in, nullptr), g); };
  auto fx = [&](const Eigen::VectorXd& v) {
    Tensor t = x;
    std::copy(v.data(), v.data() + v.size(), t.data().begin());
    return f(t);
  };
  EXPECT_LT(oracle::relative_error(as_vector(dx), oracle::numeric_gradient(fx, as_vector(x), 1e-6)), 1e-6);
  for (auto* p : params) {
    const Eigen::VectorXd saved = p->value;
    auto fp = [&](const Eigen::VectorXd& v) {
      p->value = v;
      const double r = f(x);
      p->value = saved;
      return r;
    };
    EXPECT_LT(oracle::relative_error(p->grad, oracle::numeric_gradient(fp, saved, 1e-6)), 1e-6) << p->name;
  }
}

struct PafbSetup {
  Pafb block;
  Tensor high, low;
};

PafbSetup make_pafb(std::mt19937_64& rng, int c, int h, int n) {
  PafbSetup s{Pafb("pafb", c, 4), {}, {}};
  s.block.init(rng);
  nn::ParameterList params, buffers;
  s.block.collect(params);
  randomize(params, rng);
  s.block.collect_buffers(buffers);
  std::normal_distribution<double> normal(0.0, 0.2);
  for (auto* b : buffers) {
    const bool var = b->name.find("running_var") != std::string::npos;
    for (Eigen::Index i = 0; i < b->value.size(); ++i) b->value[i] = var ? 1.0 + std::abs(normal(rng)) : normal(rng);
  }
  s.high = random_tensor(n, c, h, h, rng);
  s.low = random_tensor(n, 2 * c, (h + 1) / 2, (h + 1) / 2, rng);
  return s;
}

TEST(Pafb, MatchesNaiveLoopsInBothModes) {
  std::mt19937_64 rng(4);
  for (auto [c, h, n] : {std::tuple{4, 8, 2}, std::tuple{2, 5, 3}, std::tuple{8, 4, 1}}) {
    PafbSetup s = make_pafb(rng, c, h, n);
    const auto inference = oracle::pafb(s.high, s.low, s.block, false);
    EXPECT_LT(oracle::relative_error(as_vector(s.block.forward(s.high, s.low, nullptr)), as_vector(inference.out)),
              1e-6);
    Pafb::Cache cache;
    const Tensor out = s.block.forward(s.high, s.low, &cache);
    const auto training = oracle::pafb(s.high, s.low, s.block, true);
    EXPECT_LT(oracle::relative_error(as_vector(out), as_vector(training.out)), 1e-6);
    EXPECT_LT(oracle::relative_error(as_vector(cache.omega1), as_vector(training.omega1)), 1e-6);
  }
}

TEST(Pafb, FusionWeightsSumToOneExactly) {
  std::mt19937_64 rng(5);
  PafbSetup s = make_pafb(rng, 4, 8, 2);
  Pafb::Cache cache;
  s.block.forward(s.high, s.low, &cache);
  for (std::size_t i = 0; i < cache.omega1.size(); ++i) {
    EXPECT_EQ(cache.omega1.data()[i] + cache.omega2.data()[i], 1.0);
    EXPECT_GT(cache.omega1.data()[i], 0.0);
    EXPECT_LT(cache.omega1.data()[i], 1.0);
  }
}

TEST(Pafb, ClosedGateReturnsLowResolutionInput) {
  std::mt19937_64 rng(6);
  PafbSetup s = make_pafb(rng, 4, 6, 2);
  for (Pafb::Branch* b : {&s.block.local, &s.block.global}) {
    b->bn2.gamma.value.setZero();
    b->bn2.beta.value.setConstant(-1000.0);
  }
  EXPECT_EQ(s.block.forward(s.high, s.low, nullptr).data(), s.low.data());
  for (Pafb::Branch* b : {&s.block.local, &s.block.global}) b->bn2.beta.value.setConstant(1000.0);
  // Fully open: the output is the downsampled high-resolution map.
  const Tensor d = s.block.down.forward(s.high, nullptr);
  EXPECT_EQ(s.block.forward(s.high, s.low, nullptr).data(), d.data());
}

TEST(Pafb, RejectsMismatchedShapes) {
  std::mt19937_64 rng(7);
  PafbSetup s = make_pafb(rng, 4, 8, 1);
  const Tensor bad = random_tensor(1, 8, 3, 3, rng);
  EXPECT_THROW(s.block.forward(s.high, bad, nullptr), Error);
}

TEST(Pafb, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  // Three samples: with two, the pooled global branch normalizes to +-1 and
  // its weight gradients vanish below finite-difference resolution.
  PafbSetup s = make_pafb(rng, 4, 4, 3);
  Pafb::Cache cache;
  const Tensor y = s.block.forward(s.high, s.low, &cache);
  const Tensor g = random_tensor(y.n(), y.c(), y.h(), y.w(), rng);
  nn::ParameterList params;
  s.block.collect(params);
  for (auto* p : params) p->zero_grad();
  const Pafb::Gradients grads = s.block.backward(cache, g);
  auto f = [&](const Tensor& high, const Tensor& low) {
    Pafb::Cache k;
    return dot(s.block.forward(high, low, &k), g);
  };
  auto fh = [&](const Eigen::VectorXd& v) {
    Tensor t = s.high;
    std::copy(v.data(), v.data() + v.size(), t.data().begin());
    return f(t, s.low);
  };
  auto fl = [&](const Eigen::VectorXd& v) {
    Tensor t = s.low;
    std::copy(v.data(), v.data() + v.size(), t.data().begin());
    return f(s.high, t);
  };
  EXPECT_LT(oracle::relative_error(as_vector(grads.high), oracle::numeric_gradient(fh, as_vector(s.high), 1e-6)),
            1e-5);
  EXPECT_LT(oracle::relative_error(as_vector(grads.low), oracle::numeric_gradient(fl, as_vector(s.low), 1e-6)),
            1e-5);
  for (auto* p : params) {
    const Eigen::VectorXd saved = p->value;
    auto fp = [&](const Eigen::VectorXd& v) {
      p->value = v;
      const double r = f(s.high, s.low);
      p->value = saved;
      return r;
    };
    EXPECT_LT(oracle::relative_error(p->grad, oracle::numeric_gradient(fp, saved, 1e-6), 1e-9), 1e-5) << p->name;
  }
}

}  // namespace
}  // namespace mlaface
