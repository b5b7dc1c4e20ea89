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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "mlaface/nn/layers.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace mlaface::nn {
namespace {

using mlaface::testing::random_tensor;

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

Eigen::VectorXd as_vector(const Tensor& t) { return Eigen::Map<const Eigen::VectorXd>(t.data().data(), t.size()); }

// Checks d<f(x), g>/dx against central differences.
template <typename F>
void check_input_gradient(F f, const Tensor& x, const Tensor& analytic, double tol) {
  auto scalar = [&](const Eigen::VectorXd& v) {
    Tensor y = x;
    std::copy(v.data(), v.data() + v.size(), y.data().begin());
    return f(y);
  };
  const Eigen::VectorXd numeric = oracle::numeric_gradient(scalar, as_vector(x), 1e-6);
  EXPECT_LT(oracle::relative_error(as_vector(analytic), numeric), tol);
}

template <typename F>
void check_parameter_gradient(F f, Parameter& p, double tol) {
  const Eigen::VectorXd saved = p.value;
  auto scalar = [&](const Eigen::VectorXd& v) {
    p.value = v;
    const double r = f();
    p.value = saved;
    return r;
  };
  const Eigen::VectorXd numeric = oracle::numeric_gradient(scalar, saved, 1e-6);
  EXPECT_LT(oracle::relative_error(p.grad, numeric), tol) << p.name;
}

TEST(Conv2d, MatchesDirectLoops) {
  std::mt19937_64 rng(1);
  struct Case {
    int in, out, k, stride, pad, size;
    bool bias;
  };
  for (const Case& c : {Case{3, 4, 3, 1, 1, 7, true}, Case{2, 5, 1, 1, 0, 6, false}, Case{4, 3, 1, 2, 0, 9, true},
                        Case{3, 8, 7, 2, 3, 16, false}, Case{5, 2, 3, 2, 1, 8, true}}) {
    Conv2d conv("c", c.in, c.out, c.k, c.stride, c.pad, c.bias);
    conv.init(rng);
    if (c.bias)
      for (int i = 0; i < c.out; ++i) conv.bias.value[i] = 0.1 * i - 0.2;
    const Tensor x = random_tensor(2, c.in, c.size, c.size + 1, rng);
    const Tensor fast = conv.forward(x, nullptr);
    const Tensor slow = oracle::conv2d(x, conv);
    ASSERT_TRUE(fast.same_shape(slow));
    EXPECT_LT(oracle::relative_error(as_vector(fast), as_vector(slow)), 1e-12);
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int stride : {1, 2}) {
    Conv2d conv("c", 2, 3, 3, stride, 1, true);
    conv.init(rng);
    const Tensor x = random_tensor(2, 2, 5, 6, rng);
    Conv2d::Cache cache;
    const Tensor y = conv.forward(x, &cache);
    const Tensor g = random_tensor(y.n(), y.c(), y.h(), y.w(), rng);
    ParameterList params;
    conv.collect(params);
    for (auto* p : params) p->zero_grad();
    const Tensor dx = conv.backward(cache, g);
    check_input_gradient([&](const Tensor& in) { return dot(conv.forward(in, nullptr), g); }, x, dx, 1e-7);
    for (auto* p : params) check_parameter_gradient([&] { return dot(conv.forward(x, nullptr), g); }, *p, 1e-7);
  }
}

TEST(BatchNorm, BatchModeMatchesOracleAndNormalizes) {
  std::mt19937_64 rng(3);
  BatchNorm2d bn("bn", 3);
  for (int c = 0; c < 3; ++c) {
    bn.gamma.value[c] = 1.0 + 0.5 * c;
    bn.beta.value[c] = -0.3 * c;
  }
  const Tensor x = random_tensor(4, 3, 3, 5, rng, 2.0);
  BatchNorm2d::Cache cache;
  const Tensor y = bn.forward(x, &cache);
  EXPECT_LT(oracle::relative_error(as_vector(y), as_vector(oracle::batch_norm(x, bn, true))), 1e-12);
  EXPECT_TRUE(cache.batch_statistics);
  // Running statistics only change on request.
  EXPECT_EQ(bn.running_mean.value, Eigen::VectorXd::Zero(3));
  bn.update_running_statistics(cache);
  const int count = 4 * 3 * 5;
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(bn.running_mean.value[c], 0.1 * cache.mean[c], 1e-15);
    EXPECT_NEAR(bn.running_var.value[c], 0.9 + 0.1 * cache.var[c] * count / (count - 1), 1e-15);
  }
}

TEST(BatchNorm, InferenceUsesRunningStatistics) {
  std::mt19937_64 rng(4);
  BatchNorm2d bn("bn", 2);
  bn.running_mean.value << 0.5, -1.0;
  bn.running_var.value << 4.0, 0.25;
  const Tensor x = random_tensor(1, 2, 3, 3, rng);
  EXPECT_LT(oracle::relative_error(as_vector(bn.forward(x, nullptr)), as_vector(oracle::batch_norm(x, bn, false))),
            1e-14);
  // A single value per channel cannot be normalized by its own statistics.
  const Tensor one = random_tensor(1, 2, 1, 1, rng);
  BatchNorm2d::Cache cache;
  bn.forward(one, &cache);
  EXPECT_FALSE(cache.batch_statistics);
}

TEST(BatchNorm, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  BatchNorm2d bn("bn", 3);
  for (int c = 0; c < 3; ++c) {
    bn.gamma.value[c] = 0.7 + 0.4 * c;
    bn.beta.value[c] = 0.1 * c;
  }
  const Tensor x = random_tensor(3, 3, 2, 3, rng);
  BatchNorm2d::Cache cache;
  const Tensor y = bn.forward(x, &cache);
  const Tensor g = random_tensor(3, 3, 2, 3, rng);
  ParameterList params;
  bn.collect(params);
  for (auto* p : params) p->zero_grad();
  const Tensor dx = bn.backward(cache, g);
  auto f = [&](const Tensor& in) {
    BatchNorm2d::Cache k;
    return dot(bn.forward(in, &k), g);
  };
  check_input_gradient(f, x, dx, 1e-6);
  for (auto* p : params) check_parameter_gradient([&] { return f(x); }, *p, 1e-7);
}

TEST(Linear, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  Linear fc("fc", 5, 4);
  fc.init(rng, 0.5);
  const Tensor x = random_tensor(3, 5, 1, 1, rng);
  Linear::Cache cache;
  const Tensor y = fc.forward(x, &cache);
  ASSERT_EQ(y.c(), 4);
  const Tensor g = random_tensor(3, 4, 1, 1, rng);
  ParameterList params;
  fc.collect(params);
  for (auto* p : params) p->zero_grad();
  const Tensor dx = fc.backward(cache, g);
  check_input_gradient([&](const Tensor& in) { return dot(fc.forward(in, nullptr), g); }, x, dx, 1e-8);
  for (auto* p : params) check_parameter_gradient([&] { return dot(fc.forward(x, nullptr), g); }, *p, 1e-8);
}

TEST(MaxPool, PicksWindowMaximumAndFirstOnTies) {
  Tensor x(1, 1, 4, 4);
  for (int i = 0; i < 16; ++i) x.data()[static_cast<std::size_t>(i)] = i;
  MaxPoolCache cache;
  const Tensor y = max_pool(x, &cache);
  ASSERT_EQ(y.h(), 2);
  ASSERT_EQ(y.w(), 2);
  EXPECT_EQ(y.at(0, 0, 0, 0), 5.0);
  EXPECT_EQ(y.at(0, 0, 0, 1), 7.0);
  EXPECT_EQ(y.at(0, 0, 1, 0), 13.0);
  EXPECT_EQ(y.at(0, 0, 1, 1), 15.0);

  Tensor flat(1, 1, 3, 3, 1.0);
  MaxPoolCache k2;
  max_pool(flat, &k2);
  const Tensor g = max_pool_backward(k2, Tensor(1, 1, 2, 2, 1.0));
  EXPECT_EQ(g.at(0, 0, 0, 0), 1.0);  // top-left of the first window
  double total = 0.0;
  for (double v : g.data()) total += v;
  EXPECT_EQ(total, 4.0);
}

TEST(MaxPool, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor(2, 2, 7, 6, rng);
  MaxPoolCache cache;
  const Tensor y = max_pool(x, &cache);
  const Tensor g = random_tensor(y.n(), y.c(), y.h(), y.w(), rng);
  check_input_gradient([&](const Tensor& in) { return dot(max_pool(in, nullptr), g); }, x,
                       max_pool_backward(cache, g), 1e-8);
}

TEST(Pooling, GlobalAverageAndBackward) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor(2, 3, 4, 5, rng);
  const Tensor y = global_avg_pool(x);
  const Tensor g = random_tensor(2, 3, 1, 1, rng);
  check_input_gradient([&](const Tensor& in) { return dot(global_avg_pool(in), g); }, x,
                       global_avg_pool_backward(g, 4, 5), 1e-9);
  double s = 0.0;
  for (int yy = 0; yy < 4; ++yy)
    for (int xx = 0; xx < 5; ++xx) s += x.at(1, 2, yy, xx);
  EXPECT_NEAR(y.at(1, 2, 0, 0), s / 20.0, 1e-15);
}

TEST(Activations, SigmoidIsStableAndSymmetric) {
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  for (double v : {0.3, 2.0, 7.5}) EXPECT_NEAR(sigmoid(v) + sigmoid(-v), 1.0, 1e-15);
  Tensor t(1, 1, 1, 3);
  t.data() = {-1.0, 0.0, 2.0};
  const Tensor r = relu(t);
  EXPECT_EQ(r.data(), (std::vector<double>{0.0, 0.0, 2.0}));
}

TEST(Adam, FirstStepMovesByLearningRateTimesSign) {
  Parameter p("p", {3});
  p.value << 1.0, -2.0, 0.5;
  Adam adam({&p});
  adam.zero_grad();
  p.grad << 4.0, -0.25, 0.0;
  const Eigen::VectorXd before = p.value;
  adam.step(0.01);
  EXPECT_NEAR(p.value[0], before[0] - 0.01, 1e-9);
  EXPECT_NEAR(p.value[1], before[1] + 0.01, 1e-7);
  EXPECT_EQ(p.value[2], before[2]);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, MinimizesQuadratic) {
  Parameter p("p", {2});
  p.value << 3.0, -4.0;
  Adam adam({&p});
  for (int i = 0; i < 2000; ++i) {
    adam.zero_grad();
    p.grad = 2.0 * p.value;
    adam.step(0.05);
  }
  EXPECT_LT(p.value.norm(), 1e-2);
}

}  // namespace
}  // namespace mlaface::nn
