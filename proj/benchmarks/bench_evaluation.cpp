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

#include "mlaface/evaluation.hpp"
#include "mlaface/morphable_model.hpp"

namespace mlaface {
namespace {

void BM_PointToPlane(benchmark::State& state) {
  const MorphableModel model = synthesize_toy_model(2, static_cast<int>(state.range(0)));
  const TriangleMesh gt{decode_shape(model, {}, {}), model.triangles(), {}};
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vertices pred = gt.vertices;
  for (Eigen::Index i = 0; i < pred.size(); ++i) pred.data()[i] += normal(rng);
  const auto search = state.range(1) ? NearestTriangleSearch::kBvh : NearestTriangleSearch::kExhaustive;
  for (auto _ : state) benchmark::DoNotOptimize(point_to_plane_rmse(pred, gt, search));
  state.SetItemsProcessed(state.iterations() * pred.rows());
}
BENCHMARK(BM_PointToPlane)
    ->Args({1000, 1})
    ->Args({1000, 0})
    ->Args({10000, 1})
    ->ArgNames({"vertices", "bvh"})
    ->Unit(benchmark::kMillisecond);

void BM_Icp(benchmark::State& state) {
  const MorphableModel model = synthesize_toy_model(2, 5000);
  const Vertices target = decode_shape(model, {}, {});
  Similarity s;
  s.scale = 1.1;
  s.translation << 3.0, -2.0, 1.0;
  const Vertices source = s.apply(target);
  for (auto _ : state) benchmark::DoNotOptimize(icp_align(source, target).rmse());
}
BENCHMARK(BM_Icp)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace mlaface
