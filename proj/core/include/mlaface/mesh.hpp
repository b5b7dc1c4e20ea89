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

#pragma once

#include <filesystem>

#include <Eigen/Core>

namespace mlaface {

// Row i holds vertex i. Row-major so that a length-3N coefficient-space
// vector maps directly onto an N x 3 array.
using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
using Triangles = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct TriangleMesh {
  Vertices vertices;
  Triangles triangles;
  Vertices colors;  // optional per-vertex RGB; empty when absent
};

// Writes "v x y z [r g b]", "vt u v" and "f a/a b/b c/c" records. Texture
// coordinates are the frontal (x, y) projection normalized to [0,1].
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

// Reads v and f records; polygon faces are fan-triangulated, vt/vn indices
// are ignored, negative (relative) indices are resolved.
TriangleMesh read_obj(const std::filesystem::path& path);

}  // namespace mlaface
