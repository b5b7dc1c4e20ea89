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

#include "mlaface/morphable_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <utility>

#include <Eigen/Geometry>
#include <Eigen/QR>

namespace mlaface {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void validate(const MorphableModelData& d) {
  const auto n3 = d.mean_shape.size();
  if (n3 == 0 || n3 % 3 != 0) throw_data_error("mean shape length {} is not a positive multiple of 3", n3);
  const int n = static_cast<int>(n3 / 3);
  check_size("mean texture", d.mean_texture.size(), n3);
  check_size("identity basis rows", d.basis_id.rows(), n3);
  check_size("identity basis columns", d.basis_id.cols(), kIdentityDims);
  check_size("expression basis rows", d.basis_exp.rows(), n3);
  check_size("expression basis columns", d.basis_exp.cols(), kExpressionDims);
  check_size("texture basis rows", d.basis_tex.rows(), n3);
  check_size("texture basis columns", d.basis_tex.cols(), kTextureDims);
  check_size("region mask", static_cast<long long>(d.region_mask.size()), n);
  for (Eigen::Index f = 0; f < d.triangles.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int v = d.triangles(f, k);
      if (v < 0 || v >= n) throw_data_error("triangle {} references vertex {} outside [0, {})", f, v, n);
    }
  }
  for (int i = 0; i < kNumLandmarks; ++i) {
    const int v = d.landmark_indices[static_cast<std::size_t>(i)];
    if (v < 0 || v >= n) throw_data_error("landmark {} references vertex {} outside [0, {})", i, v, n);
  }
  if (d.nose_tip_index < 0 || d.nose_tip_index >= n) {
    throw_data_error("nose tip index {} outside [0, {})", d.nose_tip_index, n);
  }
  for (Eigen::Index i = 0; i < d.mean_texture.size(); ++i) {
    const double t = d.mean_texture[i];
    if (!(t >= 0.0 && t <= 1.0)) throw_data_error("mean texture entry {} = {} outside [0,1]", i, t);
  }
}

Vertices as_vertices(const Eigen::VectorXd& flat) {
  return Eigen::Map<const Vertices>(flat.data(), flat.size() / 3, 3);
}

Eigen::VectorXd flatten(const Vertices& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
}

// Incremental convex hull. Faces are returned counter-clockwise when seen
// from outside. Assumes points in general position on a convex surface.
std::vector<Eigen::Vector3i> convex_hull(const std::vector<Eigen::Vector3d>& pts) {
  struct Face {
    int a, b, c;
    Eigen::Vector3d normal;
    double offset;
    bool alive;
  };
  std::vector<Face> faces;
  auto make_face = [&](int a, int b, int c) {
    Eigen::Vector3d n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    n.normalize();
    faces.push_back({a, b, c, n, n.dot(pts[a]), true});
  };

  const int count = static_cast<int>(pts.size());
  int i1 = 1;
  for (int i = 1; i < count; ++i) {
    if ((pts[i] - pts[0]).squaredNorm() > (pts[i1] - pts[0]).squaredNorm()) i1 = i;
  }
  int i2 = -1;
  double best = -1;
  for (int i = 0; i < count; ++i) {
    const double d = (pts[i] - pts[0]).cross(pts[i1] - pts[0]).squaredNorm();
    if (d > best) best = d, i2 = i;
  }
  int i3 = -1;
  best = -1;
  const Eigen::Vector3d plane_n = (pts[i1] - pts[0]).cross(pts[i2] - pts[0]).normalized();
  for (int i = 0; i < count; ++i) {
    const double d = std::abs(plane_n.dot(pts[i] - pts[0]));
    if (d > best) best = d, i3 = i;
  }
  const std::array<int, 4> tet = {0, i1, i2, i3};
  const Eigen::Vector3d centre = (pts[0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
  const std::array<std::array<int, 3>, 4> tet_faces = {{{0, 1, 2}, {0, 3, 1}, {1, 3, 2}, {0, 2, 3}}};
  for (const auto& f : tet_faces) {
    int a = tet[f[0]], b = tet[f[1]], c = tet[f[2]];
    const Eigen::Vector3d n = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    if (n.dot(centre - pts[a]) > 0) std::swap(b, c);
    make_face(a, b, c);
  }

  constexpr double kEps = 1e-12;
  for (int p = 0; p < count; ++p) {
    if (std::find(tet.begin(), tet.end(), p) != tet.end()) continue;
    std::set<std::pair<int, int>> visible_edges;
    std::vector<std::size_t> visible;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].alive && faces[f].normal.dot(pts[p]) - faces[f].offset > kEps) visible.push_back(f);
    }
    if (visible.empty()) continue;
    for (auto f : visible) {
      visible_edges.insert({faces[f].a, faces[f].b});
      visible_edges.insert({faces[f].b, faces[f].c});
      visible_edges.insert({faces[f].c, faces[f].a});
      faces[f].alive = false;
    }
    for (const auto& [u, v] : visible_edges) {
      if (!visible_edges.count({v, u})) make_face(u, v, p);
    }
  }
  std::vector<Eigen::Vector3i> out;
  for (const auto& f : faces) {
    if (f.alive) out.emplace_back(f.a, f.b, f.c);
  }
  return out;
}

// Canonical 68-point layout in normalized frontal face coordinates, y up.
std::array<Eigen::Vector2d, kNumLandmarks> landmark_template() {
  constexpr double kPi = std::numbers::pi;
  std::array<Eigen::Vector2d, kNumLandmarks> t;
  for (int i = 0; i <= 16; ++i) {  // jaw
    const double a = kPi + kPi * i / 16.0;
    t[i] = {0.85 * std::cos(a), 0.15 + 0.95 * std::sin(a)};
  }
  for (int i = 0; i < 5; ++i) {  // brows
    const double x = 0.15 + 0.55 * (4 - i) / 4.0;
    const double y = 0.45 + 0.06 * std::sin(kPi * i / 4.0);
    t[17 + i] = {-x, y};
    t[26 - i] = {x, y};
  }
  for (int i = 0; i < 4; ++i) t[27 + i] = {0.0, 0.35 - 0.12 * i};  // nose bridge
  for (int i = 0; i < 5; ++i) t[31 + i] = {-0.2 + 0.1 * i, -0.1};  // nostrils
  auto ellipse = [&](int first, int count, Eigen::Vector2d c, double rx, double ry) {
    for (int i = 0; i < count; ++i) {
      const double a = kPi - 2.0 * kPi * i / count;
      t[first + i] = c + Eigen::Vector2d(rx * std::cos(a), ry * std::sin(a));
    }
  };
  ellipse(36, 6, {-0.4, 0.25}, 0.15, 0.06);  // eyes
  ellipse(42, 6, {0.4, 0.25}, 0.15, 0.06);
  ellipse(48, 12, {0.0, -0.4}, 0.35, 0.15);  // outer lip
  ellipse(60, 8, {0.0, -0.4}, 0.22, 0.06);   // inner lip
  return t;
}

Eigen::MatrixXd orthonormal_columns(Eigen::MatrixXd m) {
  const Eigen::Index rows = m.rows();
  Eigen::MatrixXd out(rows, m.cols());
  // Columns beyond the ambient dimension are orthonormalized block-wise.
  for (Eigen::Index start = 0; start < m.cols(); start += rows) {
    const Eigen::Index width = std::min(rows, m.cols() - start);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.middleCols(start, width));
    out.middleCols(start, width) = qr.householderQ() * Eigen::MatrixXd::Identity(rows, width);
  }
  return out;
}

Eigen::MatrixXd smooth_random_basis(const std::vector<Eigen::Vector3d>& directions, int columns,
                                    std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = static_cast<int>(directions.size());
  // Monomials of the unit direction up to degree 4 (105 smooth fields >= 80).
  std::vector<std::array<int, 3>> powers;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      for (int c = 0; a + b + c <= 4; ++c) powers.push_back({a, b, c});
  const auto n_powers = static_cast<Eigen::Index>(powers.size());
  Eigen::MatrixXd monomials(n, n_powers);
  for (int v = 0; v < n; ++v) {
    const auto& u = directions[static_cast<std::size_t>(v)];
    for (Eigen::Index p = 0; p < n_powers; ++p) {
      const auto& e = powers[static_cast<std::size_t>(p)];
      monomials(v, p) = std::pow(u.x(), e[0]) * std::pow(u.y(), e[1]) * std::pow(u.z(), e[2]);
    }
  }
  Eigen::MatrixXd m(3 * n, columns);
  for (int k = 0; k < columns; ++k) {
    Eigen::MatrixXd weights(n_powers, 3);
    for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = normal(rng);
    for (int v = 0; v < n; ++v) {
      for (int axis = 0; axis < 3; ++axis) {
        double s = 0.01 * normal(rng);
        for (Eigen::Index p = 0; p < n_powers; ++p) s += weights(p, axis) * monomials(v, p);
        m(3 * v + axis, k) = s;
      }
    }
  }
  return orthonormal_columns(std::move(m));
}

template <typename Matrix>
std::vector<double> row_major_values(const Matrix& m) {
  RowMajorMatrix rm = m;
  return {rm.data(), rm.data() + rm.size()};
}

Eigen::MatrixXd matrix_from(const ArrayContainer::RealArray& a, const char* name) {
  if (a.shape.size() != 2) throw_data_error("array '{}' must have rank 2", name);
  return Eigen::Map<const RowMajorMatrix>(a.values.data(), static_cast<Eigen::Index>(a.shape[0]),
                                          static_cast<Eigen::Index>(a.shape[1]));
}

Eigen::VectorXd vector_from(const ArrayContainer::RealArray& a) {
  return Eigen::Map<const Eigen::VectorXd>(a.values.data(), static_cast<Eigen::Index>(a.values.size()));
}

}  // namespace

MorphableModel::MorphableModel(MorphableModelData data) : data_(std::move(data)) {
  validate(data_);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index f = 0; f < data_.triangles.rows(); ++f) {
    bool inside = true;
    for (int k = 0; k < 3; ++k) inside = inside && data_.region_mask[static_cast<std::size_t>(data_.triangles(f, k))];
    if (inside) kept.push_back(f);
  }
  region_triangles_.resize(static_cast<Eigen::Index>(kept.size()), 3);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    region_triangles_.row(static_cast<Eigen::Index>(i)) = data_.triangles.row(kept[i]);
  }
}

Vertices decode_shape(const MorphableModel& model, const ShapeCoefficients& alpha,
                      const ExpressionCoefficients& beta) {
  const Eigen::VectorXd s =
      model.mean_shape() + model.basis_id() * alpha.values + model.basis_exp() * beta.values;
  return as_vertices(s);
}

Vertices decode_texture(const MorphableModel& model, const TextureCoefficients& gamma) {
  const Eigen::VectorXd t = model.mean_texture() + model.basis_tex() * gamma.values;
  return as_vertices(t);
}

ShapeGradient decode_shape_backward(const MorphableModel& model, const Vertices& grad_shape) {
  check_size("shape gradient rows", grad_shape.rows(), model.num_vertices());
  const Eigen::VectorXd g = flatten(grad_shape);
  ShapeGradient out;
  out.alpha.values = model.basis_id().transpose() * g;
  out.beta.values = model.basis_exp().transpose() * g;
  return out;
}

TextureCoefficients decode_texture_backward(const MorphableModel& model,
                                            const Vertices& grad_texture) {
  check_size("texture gradient rows", grad_texture.rows(), model.num_vertices());
  TextureCoefficients out;
  out.values = model.basis_tex().transpose() * flatten(grad_texture);
  return out;
}

Landmarks3 select_landmarks(const Vertices& vertices, std::span<const int> indices) {
  check_size("landmark index list", static_cast<long long>(indices.size()), kNumLandmarks);
  Landmarks3 out;
  for (int i = 0; i < kNumLandmarks; ++i) {
    const int v = indices[static_cast<std::size_t>(i)];
    if (v < 0 || v >= vertices.rows()) {
      throw_data_error("landmark {} references vertex {} outside [0, {})", i, v, vertices.rows());
    }
    out.row(i) = vertices.row(v);
  }
  return out;
}

Landmarks3 select_landmarks(const Vertices& vertices, const MorphableModel& model) {
  return select_landmarks(vertices, std::span<const int>(model.landmark_indices()));
}

MorphableModel synthesize_toy_model(std::uint64_t seed, int n_vertices) {
  if (n_vertices < 12) throw_config_error("toy model needs at least 12 vertices, got {}", n_vertices);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Fibonacci sphere with a small seeded jitter to avoid coplanar quads.
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Eigen::Vector3d> dirs(static_cast<std::size_t>(n_vertices));
  for (int i = 0; i < n_vertices; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5 + jitter(rng)) / n_vertices;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i + jitter(rng) / std::sqrt(static_cast<double>(n_vertices));
    dirs[static_cast<std::size_t>(i)] = Eigen::Vector3d(r * std::cos(phi), y, r * std::sin(phi)).normalized();
  }
  const auto hull = convex_hull(dirs);

  // Radial deformation: ellipsoid head, frontal nose bump, low-frequency noise.
  const Eigen::Vector3d semi_axes(75.0, 95.0, 85.0);
  std::array<Eigen::Vector3d, 3> noise_dirs;
  for (auto& d : noise_dirs) d = Eigen::Vector3d(normal(rng), normal(rng), normal(rng)).normalized();
  MorphableModelData data;
  data.mean_shape.resize(3 * n_vertices);
  data.mean_texture.resize(3 * n_vertices);
  for (int i = 0; i < n_vertices; ++i) {
    const Eigen::Vector3d& u = dirs[static_cast<std::size_t>(i)];
    double radius = 1.0 / u.cwiseQuotient(semi_axes).norm();
    if (u.z() > 0) {
      const double off_axis = u.x() * u.x() + (u.y() + 0.05) * (u.y() + 0.05);
      radius += 22.0 * std::exp(-off_axis / (2.0 * 0.18 * 0.18));
    }
    for (const auto& d : noise_dirs) radius += 1.5 * std::pow(d.dot(u), 2);
    data.mean_shape.segment<3>(3 * i) = radius * u;
    const Eigen::Vector3d skin(0.80, 0.62, 0.52);
    data.mean_texture.segment<3>(3 * i) = skin + Eigen::Vector3d::Constant(0.03 * u.y());
  }
  data.triangles.resize(static_cast<Eigen::Index>(hull.size()), 3);
  for (std::size_t f = 0; f < hull.size(); ++f) data.triangles.row(static_cast<Eigen::Index>(f)) = hull[f].transpose();

  data.basis_id = smooth_random_basis(dirs, kIdentityDims, rng);
  data.basis_exp = smooth_random_basis(dirs, kExpressionDims, rng);
  data.basis_tex = smooth_random_basis(dirs, kTextureDims, rng);

  int nose = 0;
  for (int i = 1; i < n_vertices; ++i) {
    if (data.mean_shape[3 * i + 2] > data.mean_shape[3 * nose + 2]) nose = i;
  }
  data.nose_tip_index = nose;

  const auto layout = landmark_template();
  for (int l = 0; l < kNumLandmarks; ++l) {
    const double yaw = layout[static_cast<std::size_t>(l)].x() * std::numbers::pi / 3.0;
    const double pitch = layout[static_cast<std::size_t>(l)].y() * std::numbers::pi * 5.0 / 18.0;
    const Eigen::Vector3d target(std::sin(yaw) * std::cos(pitch), std::sin(pitch),
                                 std::cos(yaw) * std::cos(pitch));
    int best = -1;
    double best_dot = -2.0;
    for (int i = 0; i < n_vertices; ++i) {
      const double d = dirs[static_cast<std::size_t>(i)].dot(target);
      if (d > best_dot) best_dot = d, best = i;
    }
    data.landmark_indices[static_cast<std::size_t>(l)] = best;
  }
  data.region_mask.assign(static_cast<std::size_t>(n_vertices), 1);
  return MorphableModel(std::move(data));
}

void store_model(const MorphableModel& model, ArrayContainer& c) {
  const auto n3 = static_cast<std::uint64_t>(model.mean_shape().size());
  const auto& d = model.data();
  c.put_real("mean_shape", {n3}, {d.mean_shape.data(), d.mean_shape.data() + n3});
  c.put_real("mean_texture", {n3}, {d.mean_texture.data(), d.mean_texture.data() + n3});
  c.put_real("basis_id", {n3, kIdentityDims}, row_major_values(d.basis_id));
  c.put_real("basis_exp", {n3, kExpressionDims}, row_major_values(d.basis_exp));
  c.put_real("basis_tex", {n3, kTextureDims}, row_major_values(d.basis_tex));
  std::vector<std::int64_t> tris(d.triangles.data(), d.triangles.data() + d.triangles.size());
  c.put_int("triangles", {static_cast<std::uint64_t>(d.triangles.rows()), 3}, std::move(tris));
  c.put_int("landmark_indices", {kNumLandmarks},
            {d.landmark_indices.begin(), d.landmark_indices.end()});
  c.put_int("nose_tip_index", {1}, {d.nose_tip_index});
  c.put_int("region_mask", {static_cast<std::uint64_t>(d.region_mask.size())},
            {d.region_mask.begin(), d.region_mask.end()});
}

MorphableModel restore_model(const ArrayContainer& c) {
  MorphableModelData d;
  d.mean_shape = vector_from(c.real("mean_shape"));
  d.mean_texture = vector_from(c.real("mean_texture"));
  d.basis_id = matrix_from(c.real("basis_id"), "basis_id");
  d.basis_exp = matrix_from(c.real("basis_exp"), "basis_exp");
  d.basis_tex = matrix_from(c.real("basis_tex"), "basis_tex");
  const auto& tris = c.integer("triangles");
  if (tris.shape.size() != 2 || tris.shape[1] != 3) throw_data_error("triangles must be F x 3");
  d.triangles.resize(static_cast<Eigen::Index>(tris.shape[0]), 3);
  for (std::size_t i = 0; i < tris.values.size(); ++i) d.triangles.data()[i] = static_cast<int>(tris.values[i]);
  const auto& lm = c.integer("landmark_indices");
  check_size("landmark_indices", static_cast<long long>(lm.values.size()), kNumLandmarks);
  for (int i = 0; i < kNumLandmarks; ++i) {
    d.landmark_indices[static_cast<std::size_t>(i)] = static_cast<int>(lm.values[static_cast<std::size_t>(i)]);
  }
  const auto& nose = c.integer("nose_tip_index");
  check_size("nose_tip_index", static_cast<long long>(nose.values.size()), 1);
  d.nose_tip_index = static_cast<int>(nose.values[0]);
  for (auto v : c.integer("region_mask").values) d.region_mask.push_back(v != 0 ? 1 : 0);
  return MorphableModel(std::move(d));
}

void save_model(const MorphableModel& model, const std::filesystem::path& path) {
  ArrayContainer c;
  c.set_metadata(R"({"format":"mlaface-morphable-model","version":1})");
  store_model(model, c);
  c.save(path);
}

MorphableModel load_model(const std::filesystem::path& path) {
  return restore_model(ArrayContainer::load(path));
}

TriangleMesh model_mesh(const MorphableModel& model, const Vertices& shape, const Vertices& colors) {
  TriangleMesh mesh;
  mesh.vertices = shape;
  mesh.triangles = model.region_triangles();
  mesh.colors = colors;
  return mesh;
}

}  // namespace mlaface
