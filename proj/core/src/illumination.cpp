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

#include "mlaface/illumination.hpp"

#include <Eigen/Geometry>

#include "mlaface/error.hpp"

namespace mlaface {

namespace {

// Normalization is skipped below this length.
constexpr double kMinNormal = 1e-300;

Eigen::Matrix<double, kShBands, kShCoefficients / kShBands> lighting_matrix(const SHCoefficients& l) {
  return Eigen::Map<const Eigen::Matrix<double, kShBands, 3>>(l.values.data());
}

}  // namespace

SHCoefficients SHCoefficients::from(std::span<const double> v) {
  check_size("SH lighting coefficients", static_cast<long long>(v.size()), kShCoefficients);
  SHCoefficients sh;
  for (int i = 0; i < kShCoefficients; ++i) sh.values[i] = v[static_cast<std::size_t>(i)];
  return sh;
}

Vertices compute_vertex_normals(const Vertices& vertices, const Triangles& triangles) {
  Vertices acc = Vertices::Zero(vertices.rows(), 3);
  for (Eigen::Index f = 0; f < triangles.rows(); ++f) {
    const int a = triangles(f, 0), b = triangles(f, 1), c = triangles(f, 2);
    const Eigen::Vector3d pa = vertices.row(a), pb = vertices.row(b), pc = vertices.row(c);
    // |cross| = 2 * area, so summing unnormalized face normals area-weights them.
    const Eigen::Vector3d n = (pb - pa).cross(pc - pa);
    acc.row(a) += n.transpose();
    acc.row(b) += n.transpose();
    acc.row(c) += n.transpose();
  }
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double len = acc.row(i).norm();
    if (len > kMinNormal) acc.row(i) /= len;
  }
  return acc;
}

Vertices vertex_normals_backward(const Vertices& vertices, const Triangles& triangles,
                                 const Vertices& grad_normals) {
  check_size("normal gradient rows", grad_normals.rows(), vertices.rows());
  Vertices acc = Vertices::Zero(vertices.rows(), 3);
  for (Eigen::Index f = 0; f < triangles.rows(); ++f) {
    const int a = triangles(f, 0), b = triangles(f, 1), c = triangles(f, 2);
    const Eigen::Vector3d pa = vertices.row(a), pb = vertices.row(b), pc = vertices.row(c);
    const Eigen::RowVector3d n = (pb - pa).cross(pc - pa).transpose();
    acc.row(a) += n;
    acc.row(b) += n;
    acc.row(c) += n;
  }
  // Through the normalization n = m / |m|.
  Vertices grad_acc = Vertices::Zero(vertices.rows(), 3);
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    const double len = acc.row(i).norm();
    if (len <= kMinNormal) continue;
    const Eigen::RowVector3d n = acc.row(i) / len;
    const Eigen::RowVector3d g = grad_normals.row(i);
    grad_acc.row(i) = (g - n * n.dot(g)) / len;
  }
  // Through m_f = (b - a) x (c - a).
  Vertices grad = Vertices::Zero(vertices.rows(), 3);
  for (Eigen::Index f = 0; f < triangles.rows(); ++f) {
    const int a = triangles(f, 0), b = triangles(f, 1), c = triangles(f, 2);
    const Eigen::Vector3d pa = vertices.row(a), pb = vertices.row(b), pc = vertices.row(c);
    const Eigen::Vector3d g = (grad_acc.row(a) + grad_acc.row(b) + grad_acc.row(c)).transpose();
    const Eigen::Vector3d u = pb - pa, w = pc - pa;
    const Eigen::Vector3d gu = w.cross(g);
    const Eigen::Vector3d gw = g.cross(u);
    grad.row(b) += gu.transpose();
    grad.row(c) += gw.transpose();
    grad.row(a) -= (gu + gw).transpose();
  }
  return grad;
}

ShBasis sh_basis(const Vertices& normals) {
  using namespace sh_constants;
  ShBasis basis(normals.rows(), kShBands);
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const double x = normals(i, 0), y = normals(i, 1), z = normals(i, 2);
    basis(i, 0) = kBand0;
    basis(i, 1) = kBand1 * y;
    basis(i, 2) = kBand1 * z;
    basis(i, 3) = kBand1 * x;
    basis(i, 4) = kBand2 * x * y;
    basis(i, 5) = kBand2 * y * z;
    basis(i, 6) = kBand2Zonal * (3.0 * z * z - 1.0);
    basis(i, 7) = kBand2 * x * z;
    basis(i, 8) = kBand2Sq * (x * x - y * y);
  }
  return basis;
}

Vertices sh_basis_backward(const Vertices& normals, const ShBasis& g) {
  using namespace sh_constants;
  Vertices grad(normals.rows(), 3);
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const double x = normals(i, 0), y = normals(i, 1), z = normals(i, 2);
    grad(i, 0) = kBand1 * g(i, 3) + kBand2 * (y * g(i, 4) + z * g(i, 7)) + kBand2Sq * 2.0 * x * g(i, 8);
    grad(i, 1) = kBand1 * g(i, 1) + kBand2 * (x * g(i, 4) + z * g(i, 5)) - kBand2Sq * 2.0 * y * g(i, 8);
    grad(i, 2) = kBand1 * g(i, 2) + kBand2 * (y * g(i, 5) + x * g(i, 7)) + kBand2Zonal * 6.0 * z * g(i, 6);
  }
  return grad;
}

Vertices shade_texture(const Vertices& texture, const Vertices& normals, const SHCoefficients& lighting) {
  check_size("normals rows", normals.rows(), texture.rows());
  const Vertices irradiance = sh_basis(normals) * lighting_matrix(lighting);
  return texture.cwiseProduct(irradiance);
}

ShadingGradient shade_texture_backward(const Vertices& texture, const Vertices& normals,
                                       const SHCoefficients& lighting, const Vertices& grad_shaded) {
  check_size("shaded gradient rows", grad_shaded.rows(), texture.rows());
  const ShBasis basis = sh_basis(normals);
  const Eigen::Matrix<double, kShBands, 3> l = lighting_matrix(lighting);
  const Vertices irradiance = basis * l;
  ShadingGradient g;
  g.texture = grad_shaded.cwiseProduct(irradiance);
  const Vertices grad_irradiance = grad_shaded.cwiseProduct(texture);
  const Eigen::Matrix<double, kShBands, 3> grad_l = basis.transpose() * grad_irradiance;
  Eigen::Map<Eigen::Matrix<double, kShBands, 3>>(g.lighting.values.data()) = grad_l;
  const ShBasis grad_basis = grad_irradiance * l.transpose();
  g.normals = sh_basis_backward(normals, grad_basis);
  return g;
}

}  // namespace mlaface
