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

#include "mlaface/face_render.hpp"
#include "mlaface/morphable_model.hpp"
#include "mlaface/renderer.hpp"

namespace mlaface {
namespace {

const MorphableModel& bench_model() {
  static const MorphableModel model = synthesize_toy_model(1, 5000);
  return model;
}

CoefficientVector frontal_face() {
  CoefficientVector c;
  c.pose.euler_angles << 0.0, 0.3, 0.0;
  for (int ch = 0; ch < 3; ++ch) c.lighting.values[ch * kShBands] = 1.0 / sh_constants::kBand0;
  return c;
}

void BM_Rasterize(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const CameraModel camera = CameraModel::centered(size, size, 1015.0 * size / 224.0);
  const FaceRenderState face = render_face(bench_model(), frontal_face(), camera);
  for (auto _ : state) {
    FragmentBuffers fb = rasterize(face.projection.points, face.projection.depth, bench_model().triangles(), size,
                                   size);
    benchmark::DoNotOptimize(fb.triangle.data());
  }
  state.SetItemsProcessed(state.iterations() * bench_model().num_triangles());
}
BENCHMARK(BM_Rasterize)->Arg(64)->Arg(224)->Unit(benchmark::kMicrosecond);

void BM_RenderFace(benchmark::State& state) {
  const CameraModel camera;
  const CoefficientVector c = frontal_face();
  for (auto _ : state) {
    FaceRenderState s = render_face(bench_model(), c, camera);
    benchmark::DoNotOptimize(s.render.image.data().data());
  }
}
BENCHMARK(BM_RenderFace)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace mlaface
