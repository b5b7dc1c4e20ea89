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

#include "mlaface/mesh.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "mlaface/error.hpp"

namespace mlaface {

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  const bool has_colors = mesh.colors.rows() == mesh.vertices.rows() && mesh.colors.rows() > 0;
  Eigen::RowVector3d lo = mesh.vertices.colwise().minCoeff();
  Eigen::RowVector3d hi = mesh.vertices.colwise().maxCoeff();
  if (mesh.vertices.rows() == 0) lo = hi = Eigen::RowVector3d::Zero();
  const Eigen::RowVector3d extent = (hi - lo).cwiseMax(1e-12);

  std::string out;
  out.reserve(static_cast<std::size_t>(mesh.vertices.rows()) * 80);
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    const auto v = mesh.vertices.row(i);
    if (has_colors) {
      const auto c = mesh.colors.row(i);
      fmt::format_to(std::back_inserter(out), "v {:.17g} {:.17g} {:.17g} {:.9g} {:.9g} {:.9g}\n",
                     v.x(), v.y(), v.z(), c.x(), c.y(), c.z());
    } else {
      fmt::format_to(std::back_inserter(out), "v {:.17g} {:.17g} {:.17g}\n", v.x(), v.y(), v.z());
    }
  }
  for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
    fmt::format_to(std::back_inserter(out), "vt {:.9g} {:.9g}\n",
                   (mesh.vertices(i, 0) - lo.x()) / extent.x(),
                   (mesh.vertices(i, 1) - lo.y()) / extent.y());
  }
  for (Eigen::Index f = 0; f < mesh.triangles.rows(); ++f) {
    const int a = mesh.triangles(f, 0) + 1;
    const int b = mesh.triangles(f, 1) + 1;
    const int c = mesh.triangles(f, 2) + 1;
    fmt::format_to(std::back_inserter(out), "f {}/{} {}/{} {}/{}\n", a, a, b, b, c, c);
  }
  std::ofstream file(path);
  if (!file) throw_data_error("cannot open '{}' for writing", path.string());
  file << out;
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw_data_error("cannot open OBJ '{}'", path.string());
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> colors;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ss >> p.x() >> p.y() >> p.z())) {
        throw_data_error("{}:{}: malformed vertex record", path.string(), line_no);
      }
      positions.push_back(p);
      Eigen::Vector3d c;
      if (ss >> c.x() >> c.y() >> c.z()) colors.push_back(c);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string token;
      while (ss >> token) {
        const int raw = std::stoi(token.substr(0, token.find('/')));
        const int resolved = raw < 0 ? static_cast<int>(positions.size()) + raw : raw - 1;
        idx.push_back(resolved);
      }
      if (idx.size() < 3) throw_data_error("{}:{}: face with < 3 vertices", path.string(), line_no);
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        faces.emplace_back(idx[0], idx[k], idx[k + 1]);
      }
    }
  }
  TriangleMesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(positions.size()), 3);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    mesh.vertices.row(static_cast<Eigen::Index>(i)) = positions[i].transpose();
  }
  mesh.triangles.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (faces[f][k] < 0 || faces[f][k] >= static_cast<int>(positions.size())) {
        throw_data_error("{}: face {} references vertex {} of {}", path.string(), f,
                         faces[f][k] + 1, positions.size());
      }
    }
    mesh.triangles.row(static_cast<Eigen::Index>(f)) = faces[f].transpose();
  }
  if (colors.size() == positions.size() && !colors.empty()) {
    mesh.colors.resize(static_cast<Eigen::Index>(colors.size()), 3);
    for (std::size_t i = 0; i < colors.size(); ++i) {
      mesh.colors.row(static_cast<Eigen::Index>(i)) = colors[i].transpose();
    }
  }
  return mesh;
}

}  // namespace mlaface
