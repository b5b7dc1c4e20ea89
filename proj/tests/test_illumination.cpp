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

#include "mlaface/illumination.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

namespace mlaface {
namespace {

Vertices random_unit_normals(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vertices v(n, 3);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d d(normal(rng), normal(rng), normal(rng));
    v.row(i) = d.normalized().transpose();
  }
  return v;
}

SHCoefficients random_lighting(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 0.5);
  SHCoefficients l;
  for (int i = 0; i < kShCoefficients; ++i) l.values[i] = normal(rng);
  return l;
}

TEST(Illumination, ShadingMatchesPerVertexLoop) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Vertices n = random_unit_normals(200, rng);
    Vertices t = Vertices::Random(200, 3).cwiseAbs();
    const SHCoefficients l = random_lighting(rng);
    const Vertices fast = shade_texture(t, n, l);
    const Vertices slow = oracle::sh_shading(t, n, l.values);
    const double scale = slow.cwiseAbs().maxCoeff();
    EXPECT_LT((fast - slow).cwiseAbs().maxCoeff() / scale, 1e-12);
  }
}

TEST(Illumination, BandZeroOnlyScalesTextureUniformly) {
  std::mt19937_64 rng(2);
  const Vertices n = random_unit_normals(100, rng);
  const Vertices t = Vertices::Random(100, 3).cwiseAbs() + Vertices::Constant(100, 3, 0.1);
  SHCoefficients l;
  const double dc[3] = {1.3, 0.7, 2.1};
  for (int ch = 0; ch < 3; ++ch) l.values[ch * kShBands] = dc[ch];
  const Vertices s = shade_texture(t, n, l);
  for (int i = 0; i < 100; ++i)
    for (int ch = 0; ch < 3; ++ch) {
      EXPECT_NEAR(s(i, ch) / t(i, ch), dc[ch] * sh_constants::kBand0, 1e-14);
    }
}

TEST(Illumination, NeutralLightingReproducesTexture) {
  std::mt19937_64 rng(3);
  const Vertices n = random_unit_normals(50, rng);
  const Vertices t = Vertices::Random(50, 3);
  SHCoefficients l;
  for (int ch = 0; ch < 3; ++ch) l.values[ch * kShBands] = 1.0 / sh_constants::kBand0;
  EXPECT_LT((shade_texture(t, n, l) - t).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Illumination, VertexNormalsAreUnitAndOutwardOnToyHead) {
  const auto& m = testing::toy_model();
  const Vertices v = Eigen::Map<const Vertices>(m.mean_shape().data(), m.num_vertices(), 3);
  const Vertices n = compute_vertex_normals(v, m.triangles());
  for (int i = 0; i < m.num_vertices(); ++i) {
    EXPECT_NEAR(n.row(i).norm(), 1.0, 1e-12);
    EXPECT_GT(n.row(i).dot(v.row(i).normalized()), 0.0);
  }
}

TEST(Illumination, ShadingGradientsMatchFiniteDifferences) {
  const auto& m = testing::toy_model();
  std::mt19937_64 rng(4);
  const int nv = 40;
  // A small patch of the toy head keeps the check fast.
  Vertices v = Eigen::Map<const Vertices>(m.mean_shape().data(), m.num_vertices(), 3);
  const Triangles& tri = m.triangles();
  Vertices texture = Vertices::Random(m.num_vertices(), 3).cwiseAbs();
  const SHCoefficients light = random_lighting(rng);
  Vertices upstream = Vertices::Random(m.num_vertices(), 3);

  auto loss = [&](const Vertices& verts, const Vertices& tex, const SHCoefficients& l) {
    const Vertices n = compute_vertex_normals(verts, tri);
    return (shade_texture(tex, n, l).array() * upstream.array()).sum();
  };
  const Vertices normals = compute_vertex_normals(v, tri);
  const ShadingGradient g = shade_texture_backward(texture, normals, light, upstream);
  const Vertices g_verts = vertex_normals_backward(v, tri, g.normals);

  // Lighting.
  auto f_light = [&](const Eigen::VectorXd& x) {
    SHCoefficients l;
    l.values = x;
    return loss(v, texture, l);
  };
  EXPECT_LT(oracle::relative_error(g.lighting.values, oracle::numeric_gradient(f_light, light.values, 1e-6)), 1e-7);

  // Texture and vertices, restricted to the first nv rows.
  Eigen::VectorXd tex0(3 * nv), vert0(3 * nv), g_tex(3 * nv), g_vert(3 * nv);
  for (int i = 0; i < nv; ++i)
    for (int k = 0; k < 3; ++k) {
      tex0[3 * i + k] = texture(i, k);
      vert0[3 * i + k] = v(i, k);
      g_tex[3 * i + k] = g.texture(i, k);
      g_vert[3 * i + k] = g_verts(i, k);
    }
  auto f_tex = [&](const Eigen::VectorXd& x) {
    Vertices t = texture;
    for (int i = 0; i < nv; ++i)
      for (int k = 0; k < 3; ++k) t(i, k) = x[3 * i + k];
    return loss(v, t, light);
  };
  EXPECT_LT(oracle::relative_error(g_tex, oracle::numeric_gradient(f_tex, tex0, 1e-6)), 1e-7);
  auto f_vert = [&](const Eigen::VectorXd& x) {
    Vertices w = v;
    for (int i = 0; i < nv; ++i)
      for (int k = 0; k < 3; ++k) w(i, k) = x[3 * i + k];
    return loss(w, texture, light);
  };
  EXPECT_LT(oracle::relative_error(g_vert, oracle::numeric_gradient(f_vert, vert0, 1e-5)), 1e-5);
}

}  // namespace
}  // namespace mlaface
