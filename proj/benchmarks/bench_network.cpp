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

#include <benchmark/benchmark.h>

#include "mlaface/backbone.hpp"

namespace mlaface {
namespace {

Image noise_image(int size) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image image(size, size, 3);
  for (double& v : image.data()) v = u(rng);
  return image;
}

void BM_ForwardFull(benchmark::State& state) {
  const Network net(ArchConfig::full(), 1);
  const Image image = noise_image(224);
  const nn::Tensor x = images_to_tensor({&image});
  for (auto _ : state) {
    nn::Tensor y = net.forward(x, nullptr);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_ForwardFull)->Unit(benchmark::kMillisecond)->Iterations(3);

void BM_ForwardBackwardTiny(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  Network net(ArchConfig::tiny(size), 1);
  const Image image = noise_image(size);
  const nn::Tensor x = images_to_tensor({&image, &image});
  nn::Tensor g(2, 257, 1, 1);
  g.data().assign(g.size(), 1e-3);
  for (auto _ : state) {
    NetworkCache cache;
    nn::Tensor y = net.forward(x, &cache);
    net.zero_grad();
    net.backward(cache, g);
    benchmark::DoNotOptimize(y.data().data());
  }
}
BENCHMARK(BM_ForwardBackwardTiny)->Arg(64)->Arg(224)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace mlaface
